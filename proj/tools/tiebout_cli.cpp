#include "tiebout/cli.hpp"

int main(int argc, char** argv) { return tiebout::run_cli(argc, argv); }

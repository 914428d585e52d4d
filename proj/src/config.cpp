#include "tiebout/config.hpp"

#include <fstream>
#include <set>

#include "tiebout/error.hpp"

namespace tiebout {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  fail(ErrorCode::validation, path + ": " + what);
}

// A JSON object plus its path; rejects keys it was not asked about.
class Node {
 public:
  Node(const json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_, "expected an object");
    for (const auto& [key, value] : j_.items()) {
      if (!allowed.count(key)) bad(path_ + "." + key, "unknown key");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const std::string& key) const {
    if (!has(key)) bad(path_ + "." + key, "missing");
    return j_.at(key);
  }
  std::string path(const std::string& key) const { return path_ + "." + key; }

  double number(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) bad(path(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  std::size_t count(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      bad(path(key), "expected a nonnegative integer");
    }
    return v.get<std::size_t>();
  }
  std::size_t count(const std::string& key, std::size_t fallback) const {
    return has(key) ? count(key) : fallback;
  }
  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_boolean()) bad(path(key), "expected true or false");
    return at(key).get<bool>();
  }
  std::string text(const std::string& key) const {
    if (!at(key).is_string()) bad(path(key), "expected a string");
    return at(key).get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }
  std::vector<double> numbers(const std::string& key) const { return to_numbers(at(key), path(key)); }
  std::vector<std::vector<double>> rows(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) bad(path(key), "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      out.push_back(to_numbers(v[k], path(key) + "[" + std::to_string(k) + "]"));
    }
    return out;
  }
  std::vector<std::size_t> indices(const std::string& key) const {
    std::vector<std::size_t> out;
    for (double x : numbers(key)) {
      if (x < 0.0 || x != static_cast<double>(static_cast<std::size_t>(x))) {
        bad(path(key), "expected nonnegative integers");
      }
      out.push_back(static_cast<std::size_t>(x));
    }
    return out;
  }

  static std::vector<double> to_numbers(const json& v, const std::string& path) {
    if (!v.is_array()) bad(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) bad(path, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

// Elements of an array, or a single object replicated `n` times.
std::vector<std::pair<const json*, std::string>> per_community(const json& v,
                                                               const std::string& path,
                                                               std::size_t n) {
  std::vector<std::pair<const json*, std::string>> out;
  if (v.is_array()) {
    if (v.size() != n) {
      bad(path, "expected " + std::to_string(n) + " entries, one per community");
    }
    for (std::size_t k = 0; k < v.size(); ++k) {
      out.emplace_back(&v[k], path + "[" + std::to_string(k) + "]");
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) out.emplace_back(&v, path);
  }
  return out;
}

Box parse_box(const json& j, const std::string& path) {
  Node node(j, path, {"lo", "hi"});
  Box box{node.numbers("lo"), node.numbers("hi")};
  if (box.lo.size() != box.hi.size() || box.lo.empty()) bad(path, "lo and hi must match");
  for (std::size_t a = 0; a < box.lo.size(); ++a) {
    if (!(box.lo[a] <= box.hi[a])) bad(path, "lo must not exceed hi");
  }
  return box;
}

TypeSpace parse_type(const json& j, const std::string& path, std::size_t index) {
  Node node(j, path, {"dimension", "support", "density", "mass_share"});
  TypeSpace t;
  t.type_index = index;
  t.dimension = node.count("dimension");
  if (t.dimension < 1 || t.dimension > 3) bad(node.path("dimension"), "must be 1, 2 or 3");
  t.mass_share = node.number("mass_share", 1.0);
  if (!(t.mass_share > 0.0)) bad(node.path("mass_share"), "must be positive");

  Node support(node.at("support"), node.path("support"), {"kind", "lo", "hi", "center", "radius"});
  const std::string kind = support.text("kind", "box");
  if (kind == "box") {
    Box box{support.numbers("lo"), support.numbers("hi")};
    t.support = box_support(box);
  } else if (kind == "ball") {
    const double r = support.number("radius");
    if (!(r > 0.0)) bad(support.path("radius"), "must be positive");
    t.support = ball_support(support.numbers("center"), r);
  } else {
    bad(support.path("kind"), "expected box or ball");
  }
  const Box& b = t.support.bounds;
  if (b.lo.size() != t.dimension || b.hi.size() != t.dimension) {
    bad(node.path("support"), "support dimension does not match the type dimension");
  }
  for (std::size_t a = 0; a < t.dimension; ++a) {
    if (!(b.lo[a] < b.hi[a])) bad(node.path("support"), "support box is empty");
  }

  if (node.has("density")) {
    Node density(node.at("density"), node.path("density"),
                 {"kind", "pieces", "background", "nodes", "values"});
    const std::string dk = density.text("kind", "uniform");
    if (dk == "uniform") {
      t.density.kind = DensitySpec::Kind::uniform;
    } else if (dk == "piecewise_constant") {
      t.density.kind = DensitySpec::Kind::piecewise_constant;
      t.density.background = density.number("background", 0.0);
      const json& pieces = density.at("pieces");
      if (!pieces.is_array()) bad(density.path("pieces"), "expected an array");
      for (std::size_t k = 0; k < pieces.size(); ++k) {
        const std::string pp = density.path("pieces") + "[" + std::to_string(k) + "]";
        Node piece(pieces[k], pp, {"lo", "hi", "value"});
        DensitySpec::Piece p{Box{piece.numbers("lo"), piece.numbers("hi")}, piece.number("value")};
        if (p.box.dimension() != t.dimension) bad(pp, "piece dimension mismatch");
        if (p.value < 0.0) bad(pp, "density must be nonnegative");
        t.density.pieces.push_back(std::move(p));
      }
    } else if (dk == "tabulated") {
      t.density.kind = DensitySpec::Kind::tabulated;
      t.density.nodes = density.rows("nodes");
      t.density.values = density.numbers("values");
      if (t.density.nodes.size() != t.dimension) bad(density.path("nodes"), "one node list per axis");
      std::size_t expected = 1;
      for (const auto& axis : t.density.nodes) {
        if (axis.size() < 2) bad(density.path("nodes"), "each axis needs at least two nodes");
        for (std::size_t k = 1; k < axis.size(); ++k) {
          if (!(axis[k] > axis[k - 1])) bad(density.path("nodes"), "nodes must increase");
        }
        expected *= axis.size();
      }
      if (t.density.values.size() != expected) bad(density.path("values"), "wrong number of values");
      for (double v : t.density.values) {
        if (v < 0.0) bad(density.path("values"), "density must be nonnegative");
      }
    } else {
      bad(density.path("kind"), "expected uniform, piecewise_constant or tabulated");
    }
  }
  return t;
}

MeasureConfig parse_measure(const json& j) {
  Node node(j, "measure", {"types", "method", "resolution", "seed"});
  MeasureConfig m;
  const json& types = node.at("types");
  if (!types.is_array() || types.empty()) bad("measure.types", "expected a non-empty array");
  for (std::size_t k = 0; k < types.size(); ++k) {
    m.types.push_back(parse_type(types[k], "measure.types[" + std::to_string(k) + "]", k));
  }
  const std::string method = node.text("method", "grid");
  if (method == "grid") {
    m.method = MeasureConfig::Method::grid;
  } else if (method == "monte_carlo") {
    m.method = MeasureConfig::Method::monte_carlo;
  } else {
    bad("measure.method", "expected grid or monte_carlo");
  }
  m.resolution = node.count("resolution", m.resolution);
  if (m.resolution < 2) bad("measure.resolution", "must be at least 2");
  m.seed = node.count("seed", m.seed);
  return m;
}

void check_point(const Point& p, std::size_t dim, const std::string& path) {
  if (p.size() != dim) bad(path, "point dimension does not match the agent space");
}

CostModel parse_costs(const json& j, std::size_t dim) {
  Node node(j, "costs", {"communities", "terms", "gradient", "step_x", "step_m"});
  const std::size_t n = node.count("communities");
  if (n < 1) bad("costs.communities", "must be at least 1");
  const std::string gradient = node.text("gradient", "analytic");
  GradientMode mode = GradientMode::analytic;
  if (gradient == "central_difference") {
    mode = GradientMode::central_difference;
  } else if (gradient != "analytic") {
    bad("costs.gradient", "expected analytic or central_difference");
  }
  const json& list = node.at("terms");
  if (!list.is_array() || list.empty()) bad("costs.terms", "expected a non-empty array");
  std::vector<CostTerm> terms;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string path = "costs.terms[" + std::to_string(k) + "]";
    if (!list[k].is_object() || !list[k].contains("kind") || !list[k]["kind"].is_string()) {
      bad(path, "every term needs a string kind");
    }
    const std::string kind = list[k]["kind"].get<std::string>();
    CostTerm term;
    auto centers = [&](const Node& t) {
      auto c = t.rows("centers");
      if (c.size() != n) bad(t.path("centers"), "one center per community");
      for (const auto& p : c) check_point(p, dim, t.path("centers"));
      return c;
    };
    if (kind == "metric") {
      Node t(list[k], path, {"kind", "types", "centers", "scale", "exponent", "power",
                             "center_from_provider", "provider_offset"});
      MetricTerm m;
      m.center_from_provider = t.flag("center_from_provider", false);
      if (m.center_from_provider) {
        m.centers.assign(n, Point(dim, 0.0));
        m.provider_offset = t.count("provider_offset", 0);
      } else {
        m.centers = centers(t);
      }
      m.scale = t.number("scale", 1.0);
      m.exponent = t.number("exponent", 2.0);
      m.power = t.number("power", 1.0);
      if (t.has("types")) term.types = t.indices("types");
      term.kind = m;
    } else if (kind == "fixed_share") {
      Node t(list[k], path, {"kind", "types", "g"});
      FixedShareTerm f;
      if (t.at("g").is_number()) {
        f.g.assign(n, t.number("g"));
      } else {
        f.g = t.numbers("g");
      }
      if (f.g.size() != n) bad(t.path("g"), "one g per community");
      if (t.has("types")) term.types = t.indices("types");
      term.kind = f;
    } else if (kind == "fee") {
      Node t(list[k], path, {"kind", "types", "coefficient", "param"});
      term.kind = FeeTerm{t.number("coefficient", 1.0), t.count("param", 0)};
      if (t.has("types")) term.types = t.indices("types");
    } else if (kind == "characteristic") {
      Node t(list[k], path, {"kind", "types", "kappa", "index", "agent_axis", "target"});
      CharacteristicTerm c;
      c.kappa = t.number("kappa", 1.0);
      c.index = t.count("index", 0);
      if (t.has("agent_axis")) {
        c.agent_axis = t.count("agent_axis");
        if (*c.agent_axis >= dim) bad(t.path("agent_axis"), "axis outside the agent space");
      }
      c.target = t.number("target", 0.0);
      if (t.has("types")) term.types = t.indices("types");
      term.kind = c;
    } else if (kind == "spillover") {
      Node t(list[k], path, {"kind", "types", "kappa", "centers"});
      SpilloverTerm s;
      s.kappa = t.number("kappa");
      s.centers = centers(t);
      if (t.has("types")) term.types = t.indices("types");
      term.kind = s;
    } else {
      bad(path + ".kind", "unknown term kind '" + kind + "'");
    }
    terms.push_back(std::move(term));
  }
  try {
    return CostModel(n, std::move(terms), mode, node.number("step_x", 1e-5),
                     node.number("step_m", 1e-5));
  } catch (const Error& e) {
    bad("costs", e.what());
  }
}

Characteristic parse_characteristic(const json& j, const std::string& path) {
  Node node(j, path, {"kind", "normalization", "axis", "type", "bandwidth", "scale", "offset"});
  Characteristic c;
  const std::string kind = node.text("kind");
  if (kind == "constant") {
    c.kind = Characteristic::Kind::constant;
  } else if (kind == "coordinate") {
    c.kind = Characteristic::Kind::coordinate;
  } else if (kind == "type_share") {
    c.kind = Characteristic::Kind::type_share;
  } else if (kind == "smoothed_median") {
    c.kind = Characteristic::Kind::smoothed_median;
  } else {
    bad(node.path("kind"), "expected constant, coordinate, type_share or smoothed_median");
  }
  const std::string norm = node.text("normalization", "raw");
  if (norm == "mean") {
    c.normalization = Characteristic::Normalization::mean;
  } else if (norm != "raw") {
    bad(node.path("normalization"), "expected raw or mean");
  }
  c.axis = node.count("axis", 0);
  if (node.has("type")) c.type = node.count("type");
  c.bandwidth = node.number("bandwidth", c.bandwidth);
  if (!(c.bandwidth > 0.0)) bad(node.path("bandwidth"), "must be positive");
  c.scale = node.number("scale", 1.0);
  c.offset = node.number("offset", 0.0);
  return c;
}

CharacteristicsSpec parse_characteristics(const json& j, std::size_t n) {
  CharacteristicsSpec spec = CharacteristicsSpec::none(n);
  if (j.is_null()) return spec;
  // Either one list per community or a single list shared by all.
  Node node(j, "characteristics", {"per_community", "all"});
  if (node.has("per_community") == node.has("all")) {
    bad("characteristics", "give exactly one of per_community and all");
  }
  const bool shared = node.has("all");
  const json& lists = shared ? node.at("all") : node.at("per_community");
  if (!lists.is_array()) bad(node.path(shared ? "all" : "per_community"), "expected an array");
  std::vector<std::pair<const json*, std::string>> entries;
  if (shared) {
    entries.assign(n, {&lists, "characteristics.all"});
  } else {
    entries = per_community(lists, "characteristics.per_community", n);
  }
  for (std::size_t i = 0; const auto& [entry, path] : entries) {
    if (!entry->is_array()) bad(path, "expected an array of characteristics");
    for (std::size_t k = 0; k < entry->size(); ++k) {
      spec.per_community[i].push_back(
          parse_characteristic((*entry)[k], path + "[" + std::to_string(k) + "]"));
    }
    ++i;
  }
  return spec;
}

ProviderUtility parse_utility(const json& j, const std::string& path) {
  Node node(j, path, {"terms"});
  ProviderUtility u;
  const json& terms = node.at("terms");
  if (!terms.is_array() || terms.empty()) bad(node.path("terms"), "expected a non-empty array");
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const std::string tp = node.path("terms") + "[" + std::to_string(k) + "]";
    Node t(terms[k], tp, {"kind", "param", "index", "weight", "target"});
    ProviderUtility::Term term;
    const std::string kind = t.text("kind");
    if (kind == "target_characteristic") {
      term.kind = ProviderUtility::Term::Kind::target_characteristic;
    } else if (kind == "target_value") {
      term.kind = ProviderUtility::Term::Kind::target_value;
    } else if (kind == "revenue") {
      term.kind = ProviderUtility::Term::Kind::revenue;
    } else {
      bad(t.path("kind"), "expected target_characteristic, target_value or revenue");
    }
    term.param = t.count("param", 0);
    term.index = t.count("index", 0);
    term.weight = t.number("weight", 1.0);
    if (!(term.weight >= 0.0)) bad(t.path("weight"), "must be nonnegative");
    term.target = t.number("target", 0.0);
    u.terms.push_back(term);
  }
  return u;
}

ExtendedSpec parse_providers(const json& j, const json& characteristics, std::size_t n) {
  Node node(j, "providers", {"utilities", "boxes", "mean_guard"});
  ExtendedSpec spec;
  spec.characteristics = parse_characteristics(characteristics, n);
  for (const auto& [entry, path] : per_community(node.at("utilities"), "providers.utilities", n)) {
    spec.providers.push_back(parse_utility(*entry, path));
  }
  for (const auto& [entry, path] : per_community(node.at("boxes"), "providers.boxes", n)) {
    FeasibleBox box;
    Box b = parse_box(*entry, path);
    for (std::size_t a = 0; a < b.lo.size(); ++a) {
      if (b.lo[a] < 0.0 || b.hi[a] > 1.0) bad(path, "provider boxes must lie in [0,1]");
    }
    box.lo = b.lo;
    box.hi = b.hi;
    spec.boxes.push_back(std::move(box));
  }
  spec.mean_guard = node.number("mean_guard", 0.0);
  const auto vl = spec.characteristics.layout();
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& t : spec.providers[i].terms) {
      if (t.param >= spec.boxes[i].lo.size()) {
        bad("providers.utilities", "utility term refers to a parameter outside the box");
      }
      if (t.kind == ProviderUtility::Term::Kind::target_characteristic && t.index >= vl.size(i)) {
        bad("providers.utilities", "utility term refers to an undeclared characteristic");
      }
    }
  }
  return spec;
}

SolverConfig parse_solver(const json& j, std::size_t n) {
  SolverConfig s;
  if (j.is_null()) return s;
  Node node(j, "solver",
            {"epsilon_floor", "epsilon_anneal", "epsilon_min", "damping", "tolerance",
             "target_residual", "max_iterations", "multistart", "seed", "newton", "allow_empty",
             "size_starts", "line_search_tolerance", "max_sweeps", "max_outer_iterations",
             "provider_probe_points", "provider_starts"});
  s.epsilon_floor = node.number("epsilon_floor", s.epsilon_floor);
  s.epsilon_anneal = node.number("epsilon_anneal", s.epsilon_anneal);
  s.epsilon_min = node.number("epsilon_min", s.epsilon_min);
  s.damping = node.number("damping", s.damping);
  s.tolerance = node.number("tolerance", s.tolerance);
  s.target_residual = node.number("target_residual", s.target_residual);
  s.max_iterations = node.count("max_iterations", s.max_iterations);
  s.multistart = node.count("multistart", s.multistart);
  s.seed = node.count("seed", s.seed);
  s.newton = node.flag("newton", s.newton);
  s.allow_empty = node.flag("allow_empty", s.allow_empty);
  if (node.has("size_starts")) s.size_starts = node.rows("size_starts");
  s.line_search_tolerance = node.number("line_search_tolerance", s.line_search_tolerance);
  s.max_sweeps = node.count("max_sweeps", s.max_sweeps);
  s.max_outer_iterations = node.count("max_outer_iterations", s.max_outer_iterations);
  s.provider_probe_points = node.count("provider_probe_points", s.provider_probe_points);
  if (node.has("provider_starts")) s.provider_starts = node.rows("provider_starts");
  for (const auto& m : s.size_starts) {
    if (m.size() != n) bad("solver.size_starts", "each start needs one size per community");
  }
  try {
    s.validate(n);
  } catch (const Error& e) {
    bad("solver", e.what());
  }
  return s;
}

StabilitySettings parse_stability(const json& j) {
  StabilitySettings s;
  if (j.is_null()) return s;
  Node node(j, "stability", {"eps_ball", "min_ball", "weak_trials", "eps_mass", "strong_trials",
                             "seed", "border_resolution"});
  s.eps_ball = node.number("eps_ball", s.eps_ball);
  s.min_ball = node.number("min_ball", s.eps_ball / 64.0);
  s.weak_trials = node.count("weak_trials", s.weak_trials);
  s.eps_mass = node.number("eps_mass", s.eps_mass);
  s.strong_trials = node.count("strong_trials", s.strong_trials);
  s.seed = node.count("seed", s.seed);
  s.borders.resolution = node.count("border_resolution", s.borders.resolution);
  if (!(s.eps_ball > 0.0) || !(s.min_ball > 0.0) || s.min_ball > s.eps_ball) {
    bad("stability", "need 0 < min_ball <= eps_ball");
  }
  if (!(s.eps_mass > 0.0 && s.eps_mass < 1.0)) bad("stability.eps_mass", "must lie in (0,1)");
  if (s.borders.resolution < 8) bad("stability.border_resolution", "must be at least 8");
  return s;
}

WelfareConfig parse_welfare(const json& j) {
  WelfareConfig w;
  if (j.is_null()) return w;
  Node node(j, "welfare", {"pareto_trials", "seed", "tolerance"});
  w.pareto_trials = node.count("pareto_trials", w.pareto_trials);
  w.seed = node.count("seed", w.seed);
  w.tolerance = node.number("tolerance", w.tolerance);
  if (!(w.tolerance > 0.0)) bad("welfare.tolerance", "must be positive");
  return w;
}

SweepPlan parse_sweep(const json& j, const CostModel& model) {
  Node node(j, "sweep", {"parameter", "values", "range", "warm_start", "classify", "refine_flips"});
  SweepPlan plan;
  plan.parameter = node.text("parameter");
  if (node.has("values") == node.has("range")) bad("sweep", "give exactly one of values and range");
  if (node.has("values")) {
    plan.values = node.numbers("values");
  } else {
    Node range(node.at("range"), "sweep.range", {"from", "to", "count"});
    const double from = range.number("from");
    const double to = range.number("to");
    const std::size_t count = range.count("count");
    if (count < 2) bad("sweep.range.count", "must be at least 2");
    for (std::size_t k = 0; k < count; ++k) {
      plan.values.push_back(from + (to - from) * static_cast<double>(k) / (count - 1));
    }
  }
  const std::string warm = node.text("warm_start", "fresh-multistart");
  if (warm == "continue-from-previous") {
    plan.warm_start = WarmStart::continue_from_previous;
  } else if (warm != "fresh-multistart") {
    bad("sweep.warm_start", "expected fresh-multistart or continue-from-previous");
  }
  plan.classify = node.flag("classify", true);
  plan.refine_flips = node.flag("refine_flips", true);
  try {
    plan.validate(model);
  } catch (const Error& e) {
    bad("sweep", e.what());
  }
  return plan;
}

OutputConfig parse_output(const json& j) {
  OutputConfig o;
  if (j.is_null()) return o;
  Node node(j, "output", {"dir", "locus"});
  o.dir = node.text("dir", o.dir);
  if (node.has("locus")) {
    Node l(node.at("locus"), "output.locus", {"centers", "delta_p", "box", "resolution"});
    LocusConfig locus;
    if (l.has("centers")) {
      auto c = l.rows("centers");
      if (c.size() != 2 || c[0].size() != 2 || c[1].size() != 2) {
        bad(l.path("centers"), "expected two planar centers");
      }
      locus.c1 = c[0];
      locus.c2 = c[1];
    }
    if (l.has("delta_p")) locus.delta_p = l.numbers("delta_p");
    if (l.has("box")) locus.box = parse_box(l.at("box"), l.path("box"));
    if (locus.box.dimension() != 2) bad(l.path("box"), "locus box must be planar");
    locus.resolution = l.count("resolution", locus.resolution);
    o.locus = locus;
  }
  return o;
}

DiagnosticsConfig parse_diagnostics(const json& j, std::size_t n) {
  DiagnosticsConfig d;
  if (j.is_null()) return d;
  Node node(j, "diagnostics", {"random_states", "states", "deltas", "seed"});
  d.random_states = node.count("random_states", d.random_states);
  if (node.has("states")) d.states = node.rows("states");
  for (const auto& m : d.states) {
    if (m.size() != n) bad("diagnostics.states", "each state needs one size per community");
  }
  if (node.has("deltas")) d.deltas = node.numbers("deltas");
  for (double x : d.deltas) {
    if (!(x > 0.0)) bad("diagnostics.deltas", "must be positive");
  }
  d.seed = node.count("seed", d.seed);
  return d;
}

const json& section(const json& j, const char* key) {
  static const json null;
  return j.contains(key) ? j.at(key) : null;
}

}  // namespace

SampledMeasure MeasureConfig::build() const {
  return method == Method::grid ? build_grid_measure(types, resolution)
                                : build_monte_carlo_measure(types, resolution, seed);
}

ExperimentConfig parse_config(const json& j) {
  Node root(j, "config", {"measure", "costs", "characteristics", "providers", "solver",
                          "stability", "welfare", "sweep", "output", "diagnostics"});
  ExperimentConfig c;
  c.source = j;
  c.measure = parse_measure(root.at("measure"));
  std::size_t dim = 0;
  for (const auto& t : c.measure.types) dim = std::max(dim, t.dimension);
  c.model = parse_costs(root.at("costs"), dim);
  const std::size_t n = c.model.communities();
  for (const auto& term : c.model.terms()) {
    for (std::size_t t : term.types) {
      if (t >= c.measure.types.size()) bad("costs.terms", "term refers to an unknown agent type");
    }
  }
  if (root.has("providers")) {
    c.extended = parse_providers(root.at("providers"), section(j, "characteristics"), n);
    const auto vl = c.extended->characteristics.with_type_shares(c.measure.types.size()).layout();
    for (const auto& term : c.model.terms()) {
      if (const auto* ct = std::get_if<CharacteristicTerm>(&term.kind)) {
        for (std::size_t i = 0; i < n; ++i) {
          if (ct->index >= vl.size(i)) {
            bad("costs.terms", "characteristic term refers to an undeclared characteristic");
          }
        }
      }
      if (const auto* mt = std::get_if<MetricTerm>(&term.kind); mt && mt->center_from_provider) {
        for (std::size_t i = 0; i < n; ++i) {
          if (mt->provider_offset + dim > c.extended->boxes[i].lo.size()) {
            bad("costs.terms", "provider-located centers need " + std::to_string(dim) +
                                   " provider parameters");
          }
        }
      }
      if (const auto* ft = std::get_if<FeeTerm>(&term.kind)) {
        for (std::size_t i = 0; i < n; ++i) {
          if (ft->param_index >= c.extended->boxes[i].lo.size()) {
            bad("costs.terms", "fee term refers to an undeclared provider parameter");
          }
        }
      }
    }
  } else {
    if (root.has("characteristics")) bad("characteristics", "characteristics need providers");
    const auto& f = c.model.flags();
    if (f.depends_on_characteristics || f.depends_on_provider_params) {
      bad("costs", "terms depending on characteristics or provider parameters need providers");
    }
  }
  c.solver = parse_solver(section(j, "solver"), n);
  if (c.extended && !c.solver.provider_starts.empty()) {
    const std::size_t total = c.extended->z_layout().total();
    for (const auto& z : c.solver.provider_starts) {
      if (z.size() != total) bad("solver.provider_starts", "each start needs every provider parameter");
    }
  }
  c.stability = parse_stability(section(j, "stability"));
  c.welfare = parse_welfare(section(j, "welfare"));
  if (root.has("sweep")) c.sweep = parse_sweep(root.at("sweep"), c.model);
  c.output = parse_output(section(j, "output"));
  c.diagnostics = parse_diagnostics(section(j, "diagnostics"), n);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::validation, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::validation, path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace tiebout

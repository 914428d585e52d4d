#pragma once

// Benchmark instances built directly in code, independently of configs/.

#include <vector>

#include "tiebout/costs.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/measure.hpp"

namespace testsupport {

using namespace tiebout;

inline SampledMeasure unit_interval(std::size_t cells) {
  TypeSpace s;
  s.dimension = 1;
  s.support = box_support(Box{{0.0}, {1.0}});
  return build_grid_measure(s, cells);
}

inline SampledMeasure unit_square(std::size_t cells) {
  TypeSpace s;
  s.dimension = 2;
  s.support = box_support(Box{{0.0, 0.0}, {1.0, 1.0}});
  return build_grid_measure(s, cells);
}

// Centers 0 and 1, cost |x - c_i| + g / m_i.
inline CostModel inst_1d(double g) { return metric_fixed_share({{0.0}, {1.0}}, {g, g}); }

// Centers 0.2 and 0.8, g = 0.06.
inline CostModel inst_1d_flat() { return metric_fixed_share({{0.2}, {0.8}}, {0.06, 0.06}); }

// Centers (0.25,0.5) and (0.75,0.5), cost lambda * ||x - c_i|| + g / m_i.
inline CostModel inst_sq2(double g, double lambda = 1.0) {
  return metric_fixed_share({{0.25, 0.5}, {0.75, 0.5}}, {g, g}, lambda);
}

// INST-SQ2 plus a congestion spillover: not separable.
inline CostModel inst_sq2_spillover(double g, double kappa) {
  MetricTerm metric;
  metric.centers = {{0.25, 0.5}, {0.75, 0.5}};
  SpilloverTerm spill;
  spill.kappa = kappa;
  spill.centers = metric.centers;
  return CostModel(2, {CostTerm{metric, {}}, CostTerm{FixedShareTerm{{g, g}}, {}},
                       CostTerm{spill, {}}});
}

struct Extended {
  CostModel model;
  ExtendedSpec spec;
  SolverConfig solver;
};

// Providers choose their location and want to sit at their members'
// centroid.
inline Extended inst_lloyd(std::size_t n, std::vector<double> start) {
  MetricTerm metric;
  metric.center_from_provider = true;
  metric.centers.assign(n, Point{0.5, 0.5});
  Extended e{CostModel(n, {CostTerm{metric, {}}, CostTerm{FixedShareTerm{std::vector<double>(n, 0.05)}, {}}}),
             {},
             {}};
  e.spec.characteristics = CharacteristicsSpec::none(n);
  for (std::size_t i = 0; i < n; ++i) {
    Characteristic cx;
    cx.kind = Characteristic::Kind::coordinate;
    cx.normalization = Characteristic::Normalization::mean;
    Characteristic cy = cx;
    cy.axis = 1;
    e.spec.characteristics.per_community[i] = {cx, cy};
    ProviderUtility u;
    u.terms = {{ProviderUtility::Term::Kind::target_characteristic, 0, 0, 1.0, 0.0},
               {ProviderUtility::Term::Kind::target_characteristic, 1, 1, 1.0, 0.0}};
    e.spec.providers.push_back(u);
    e.spec.boxes.push_back({{0.0, 0.0}, {1.0, 1.0}});
  }
  e.solver.provider_starts = {std::move(start)};
  e.solver.max_outer_iterations = 100;
  return e;
}

// Providers charge an entry fee z_i and maximize z_i m_i - z_i^2.
inline Extended inst_fee_game() {
  Extended e{metric_fixed_share({{0.25, 0.5}, {0.75, 0.5}}, {0.05, 0.05}, 1.0, 2.0, 1.0), {}, {}};
  e.spec.characteristics = CharacteristicsSpec::none(2);
  for (int i = 0; i < 2; ++i) {
    ProviderUtility u;
    u.terms = {{ProviderUtility::Term::Kind::revenue, 0, 0, 1.0, 0.0},
               {ProviderUtility::Term::Kind::target_value, 0, 0, 1.0, 0.0}};
    e.spec.providers.push_back(u);
    e.spec.boxes.push_back({{0.0}, {1.0}});
  }
  e.solver.provider_starts = {{0.2, 0.3}};
  return e;
}

}  // namespace testsupport

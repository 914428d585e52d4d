#include "tiebout/costs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tiebout/cell_quadrature.hpp"
#include "tiebout/error.hpp"

namespace tiebout {

bool CostTerm::applies_to(std::size_t type) const {
  return types.empty() || std::find(types.begin(), types.end(), type) != types.end();
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double p_norm(PointView d, double p) {
  if (p == 2.0) {
    double s = 0.0;
    for (double x : d) s += x * x;
    return std::sqrt(s);
  }
  double s = 0.0;
  for (double x : d) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

double euclid(PointView x, PointView c) {
  double s = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) s += (x[a] - c[a]) * (x[a] - c[a]);
  return std::sqrt(s);
}

PointView metric_center(const MetricTerm& t, std::size_t i, std::size_t dim,
                        const NominalState& state) {
  if (t.center_from_provider) {
    auto block = state.z_block(i);
    require(t.provider_offset + dim <= block.size(),
            "metric term reads provider parameters beyond the community block");
    return block.subspan(t.provider_offset, dim);
  }
  require(i < t.centers.size(), "metric term has no center for a community");
  require(t.centers[i].size() == dim, "metric center dimension mismatch");
  return t.centers[i];
}

}  // namespace

CostModel::CostModel(std::size_t communities, std::vector<CostTerm> terms,
                     GradientMode mode, double step_x, double step_m)
    : communities_(communities),
      terms_(std::move(terms)),
      mode_(mode),
      step_x_(step_x),
      step_m_(step_m) {
  require(communities_ >= 1, "cost model needs at least one community");
  require(step_x_ > 0.0 && step_m_ > 0.0, "finite-difference steps must be positive");
  for (const auto& term : terms_) {
    std::visit(
        overloaded{
            [&](const MetricTerm& t) {
              require(t.scale >= 0.0, "metric scale must be nonnegative");
              require(t.exponent >= 1.0, "metric exponent must be at least 1");
              require(t.power >= 1.0, "metric power must be at least 1");
              if (t.center_from_provider) {
                flags_.depends_on_provider_params = true;
              } else {
                require(t.centers.size() == communities_,
                        "metric term needs one center per community");
              }
            },
            [&](const FixedShareTerm& t) {
              require(t.g.size() == communities_,
                      "fixed-share term needs one g per community");
              for (double g : t.g) require(g >= 0.0, "fixed cost g must be nonnegative");
            },
            [&](const FeeTerm&) { flags_.depends_on_provider_params = true; },
            [&](const CharacteristicTerm&) {
              flags_.depends_on_characteristics = true;
              flags_.separable = false;
            },
            [&](const SpilloverTerm& t) {
              require(t.centers.size() == communities_,
                      "spillover term needs one center per community");
              flags_.depends_on_other_sizes = true;
              flags_.separable = false;
            },
        },
        term.kind);
  }
}

double CostModel::eval_terms(std::size_t type, std::size_t i, PointView x,
                             const NominalState& state) const {
  double c = 0.0;
  for (const auto& term : terms_) {
    if (!term.applies_to(type)) continue;
    c += std::visit(
        overloaded{
            [&](const MetricTerm& t) {
              auto center = metric_center(t, i, x.size(), state);
              Point d(x.size());
              for (std::size_t a = 0; a < x.size(); ++a) d[a] = x[a] - center[a];
              const double r = p_norm(d, t.exponent);
              return t.scale * (t.power == 1.0 ? r : std::pow(r, t.power));
            },
            [&](const FixedShareTerm& t) { return t.g[i] / state.m[i]; },
            [&](const FeeTerm& t) {
              auto block = state.z_block(i);
              require(t.param_index < block.size(), "fee term parameter index out of range");
              return t.coefficient * block[t.param_index];
            },
            [&](const CharacteristicTerm& t) {
              auto block = state.v_block(i);
              require(t.index < block.size(), "characteristic term index out of range");
              const double ref = t.agent_axis ? x[*t.agent_axis] : t.target;
              const double d = block[t.index] - ref;
              return t.kappa * d * d;
            },
            [&](const SpilloverTerm& t) {
              double s = 0.0;
              for (std::size_t k = 0; k < communities_; ++k) {
                if (k == i) continue;
                s += state.m[k] * euclid(x, t.centers[k]);
              }
              return t.kappa * s;
            },
        },
        term.kind);
  }
  return c;
}

double CostModel::eval(std::size_t type, std::size_t i, PointView x,
                       const NominalState& state) const {
  require(i < communities_, "community index out of range");
  if (!(state.m[i] > 0.0)) {
    fail(ErrorCode::zero_size_community,
         "cost requested for community " + std::to_string(i) + " with zero size");
  }
  return eval_terms(type, i, x, state);
}

std::optional<Point> CostModel::analytic_grad(std::size_t type, std::size_t i,
                                              PointView x,
                                              const NominalState& state) const {
  const std::size_t k = x.size();
  Point g(k, 0.0);
  for (const auto& term : terms_) {
    if (!term.applies_to(type)) continue;
    bool ok = true;
    std::visit(
        overloaded{
            [&](const MetricTerm& t) {
              if (t.scale == 0.0) return;
              auto center = metric_center(t, i, k, state);
              Point d(k);
              for (std::size_t a = 0; a < k; ++a) d[a] = x[a] - center[a];
              const double r = p_norm(d, t.exponent);
              if (r < step_x_) {
                if (t.power == 1.0) ok = false;
                return;
              }
              const double outer = t.scale * t.power * std::pow(r, t.power - 1.0);
              for (std::size_t a = 0; a < k; ++a) {
                const double inner =
                    t.exponent == 2.0
                        ? d[a] / r
                        : std::copysign(std::pow(std::abs(d[a]) / r, t.exponent - 1.0), d[a]);
                g[a] += outer * inner;
              }
            },
            [&](const FixedShareTerm&) {},
            [&](const FeeTerm&) {},
            [&](const CharacteristicTerm& t) {
              if (!t.agent_axis) return;
              const double v = state.v_block(i)[t.index];
              g[*t.agent_axis] += -2.0 * t.kappa * (v - x[*t.agent_axis]);
            },
            [&](const SpilloverTerm& t) {
              for (std::size_t c = 0; c < communities_; ++c) {
                if (c == i || state.m[c] == 0.0) continue;
                const double r = euclid(x, t.centers[c]);
                if (r < step_x_) {
                  ok = false;
                  return;
                }
                for (std::size_t a = 0; a < k; ++a) {
                  g[a] += t.kappa * state.m[c] * (x[a] - t.centers[c][a]) / r;
                }
              }
            },
        },
        term.kind);
    if (!ok) return std::nullopt;
  }
  return g;
}

std::optional<Point> CostModel::try_grad_x(std::size_t type, std::size_t i,
                                           PointView x,
                                           const NominalState& state) const {
  require(i < communities_, "community index out of range");
  if (!(state.m[i] > 0.0)) {
    fail(ErrorCode::zero_size_community, "gradient requested for an empty community");
  }
  if (mode_ == GradientMode::analytic) return analytic_grad(type, i, x, state);
  // Reject points where the analytic form is singular, then difference.
  if (!analytic_grad(type, i, x, state)) return std::nullopt;
  const std::size_t k = x.size();
  Point g(k);
  Point probe(x.begin(), x.end());
  for (std::size_t a = 0; a < k; ++a) {
    const double h = step_x_ * std::max(1.0, std::abs(x[a]));
    probe[a] = x[a] + h;
    const double up = eval_terms(type, i, probe, state);
    probe[a] = x[a] - h;
    const double down = eval_terms(type, i, probe, state);
    probe[a] = x[a];
    g[a] = (up - down) / (2.0 * h);
  }
  return g;
}

Point CostModel::grad_x(std::size_t type, std::size_t i, PointView x,
                        const NominalState& state) const {
  auto g = try_grad_x(type, i, x, state);
  if (!g) {
    fail(ErrorCode::singular_point,
         "cost gradient requested at a non-differentiable point of community " +
             std::to_string(i));
  }
  return *g;
}

double CostModel::dcost_dm(std::size_t type, std::size_t i, PointView x,
                           const NominalState& state) const {
  require(i < communities_, "community index out of range");
  const double mi = state.m[i];
  if (!(mi > 0.0)) {
    fail(ErrorCode::zero_size_community, "size derivative requested for an empty community");
  }
  if (mode_ == GradientMode::analytic) {
    double d = 0.0;
    for (const auto& term : terms_) {
      if (!term.applies_to(type)) continue;
      if (const auto* t = std::get_if<FixedShareTerm>(&term.kind)) d -= t->g[i] / (mi * mi);
    }
    return d;
  }
  const double h = step_m_ * mi;
  NominalState probe = state;
  probe.m[i] = mi + h;
  const double up = eval_terms(type, i, x, probe);
  probe.m[i] = mi - h;
  const double down = eval_terms(type, i, x, probe);
  return (up - down) / (2.0 * h);
}

namespace {

struct ParsedPath {
  std::string kind;
  std::size_t index = 0;
  std::string field;
};

ParsedPath parse_path(const std::string& path) {
  ParsedPath p;
  const auto dot = path.find('.');
  require(dot != std::string::npos, "parameter path must look like kind.field: " + path);
  std::string head = path.substr(0, dot);
  p.field = path.substr(dot + 1);
  const auto bracket = head.find('[');
  if (bracket != std::string::npos) {
    require(head.back() == ']', "malformed parameter path: " + path);
    p.index = std::stoul(head.substr(bracket + 1, head.size() - bracket - 2));
    head = head.substr(0, bracket);
  }
  p.kind = head;
  return p;
}

std::string kind_name(const CostTermKind& k) {
  return std::visit(overloaded{[](const MetricTerm&) { return std::string("metric"); },
                               [](const FixedShareTerm&) { return std::string("fixed_share"); },
                               [](const FeeTerm&) { return std::string("fee"); },
                               [](const CharacteristicTerm&) { return std::string("characteristic"); },
                               [](const SpilloverTerm&) { return std::string("spillover"); }},
                    k);
}

}  // namespace

double* CostModel::resolve(const std::string& path) {
  const auto p = parse_path(path);
  std::size_t seen = 0;
  for (auto& term : terms_) {
    if (kind_name(term.kind) != p.kind) continue;
    if (seen++ != p.index) continue;
    double* target = nullptr;
    std::visit(overloaded{
                   [&](MetricTerm& t) {
                     if (p.field == "scale" || p.field == "lambda") target = &t.scale;
                     if (p.field == "exponent" || p.field == "p") target = &t.exponent;
                     if (p.field == "power") target = &t.power;
                   },
                   [&](FixedShareTerm& t) {
                     if (p.field == "g" && !t.g.empty()) target = t.g.data();
                   },
                   [&](FeeTerm& t) {
                     if (p.field == "coefficient") target = &t.coefficient;
                   },
                   [&](CharacteristicTerm& t) {
                     if (p.field == "kappa") target = &t.kappa;
                     if (p.field == "target") target = &t.target;
                   },
                   [&](SpilloverTerm& t) {
                     if (p.field == "kappa") target = &t.kappa;
                   },
               },
               term.kind);
    require(target != nullptr, "unknown parameter field in path: " + path);
    return target;
  }
  fail(ErrorCode::invalid_argument, "parameter path does not resolve: " + path);
}

CostModel CostModel::with_parameter(const std::string& path, double value) const {
  CostModel copy = *this;
  double* target = copy.resolve(path);
  // fixed_share.g is one scalar family parameter shared by all communities.
  const auto p = parse_path(path);
  if (p.kind == "fixed_share") {
    std::size_t seen = 0;
    for (auto& term : copy.terms_) {
      if (auto* t = std::get_if<FixedShareTerm>(&term.kind); t && seen++ == p.index) {
        std::fill(t->g.begin(), t->g.end(), value);
      }
    }
  } else {
    *target = value;
  }
  return CostModel(copy.communities_, std::move(copy.terms_), copy.mode_, copy.step_x_,
                   copy.step_m_);
}

double CostModel::parameter(const std::string& path) const {
  return *const_cast<CostModel*>(this)->resolve(path);
}

CostModel metric_fixed_share(std::vector<Point> centers, std::vector<double> g,
                             double scale, double exponent,
                             std::optional<double> fee_coefficient) {
  const std::size_t n = centers.size();
  if (g.size() == 1 && n > 1) g.assign(n, g.front());
  std::vector<CostTerm> terms;
  terms.push_back({MetricTerm{std::move(centers), scale, exponent, 1.0, false, 0}, {}});
  terms.push_back({FixedShareTerm{std::move(g)}, {}});
  if (fee_coefficient) terms.push_back({FeeTerm{*fee_coefficient, 0}, {}});
  return CostModel(n, std::move(terms));
}

double indifference_gap_measure(const CostModel& model, const SampledMeasure& mu,
                                const NominalState& state, std::size_t i1,
                                std::size_t i2, double delta) {
  require(delta >= 0.0, "indifference band width must be nonnegative");
  const double half = 0.5 * delta;
  double total = 0.0;
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    Point spread(t.dimension(), 0.0);
    for (std::size_t s = 0; s < t.size(); ++s) {
      auto x = t.point(s);
      const double gap = model.eval(j, i1, x, state) - model.eval(j, i2, x, state);
      double fraction = 0.0;
      if (t.has_cells()) {
        auto g1 = model.try_grad_x(j, i1, x, state);
        auto g2 = model.try_grad_x(j, i2, x, state);
        for (std::size_t a = 0; a < t.dimension(); ++a) {
          spread[a] = (g1 && g2) ? ((*g1)[a] - (*g2)[a]) * t.half_widths[a] : 0.0;
        }
        fraction = linear_cell_fraction_below(gap, spread, half) -
                   linear_cell_fraction_below(gap, spread, -half);
      } else {
        fraction = std::abs(gap) < half ? 1.0 : 0.0;
      }
      total += t.weights[s] * std::max(fraction, 0.0);
    }
  }
  return total;
}

namespace {

NominalState with_sizes(const NominalState& reference, std::vector<double> m) {
  NominalState s = reference;
  s.m = std::move(m);
  if (s.v_layout.blocks() != s.m.size()) s.v_layout = BlockLayout::empty(s.m.size());
  if (s.z_layout.blocks() != s.m.size()) s.z_layout = BlockLayout::empty(s.m.size());
  return s;
}

double min_cost_over_samples(const CostModel& model, const SampledMeasure& mu,
                             std::size_t i, const NominalState& state) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      best = std::min(best, model.eval(j, i, t.point(s), state));
    }
  }
  return best;
}

// Size vectors with m_i fixed and the remainder spread over the others:
// evenly, and (when costs see other sizes) concentrated on each in turn.
std::vector<std::vector<double>> admissible_sizes(const CostModel& model, std::size_t i,
                                                  double mi) {
  const std::size_t n = model.communities();
  std::vector<std::vector<double>> out;
  std::vector<double> even(n, n > 1 ? (1.0 - mi) / static_cast<double>(n - 1) : 0.0);
  even[i] = mi;
  out.push_back(even);
  if (model.flags().depends_on_other_sizes && n > 2) {
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      std::vector<double> m(n, 0.0);
      m[i] = mi;
      m[k] = 1.0 - mi;
      out.push_back(m);
    }
  }
  return out;
}

}  // namespace

double attainable_cost_bound(const CostModel& model, const SampledMeasure& mu,
                             const NominalState& reference) {
  const std::size_t n = model.communities();
  const double floor = 1.0 / static_cast<double>(n);
  double bound = -std::numeric_limits<double>::infinity();
  constexpr int levels = 8;
  for (std::size_t i = 0; i < n; ++i) {
    for (int l = 0; l <= levels; ++l) {
      const double mi = floor + (1.0 - floor) * l / levels;
      for (auto& m : admissible_sizes(model, i, mi)) {
        NominalState s = with_sizes(reference, m);
        for (std::size_t j = 0; j < mu.type_count(); ++j) {
          const auto& t = mu.type(j);
          for (std::size_t p = 0; p < t.size(); ++p) {
            bound = std::max(bound, model.eval(j, i, t.point(p), s));
          }
        }
      }
    }
  }
  return bound;
}

std::vector<double> small_group_floor(const CostModel& model, const SampledMeasure& mu,
                                      double bound, const NominalState& reference) {
  const std::size_t n = model.communities();
  const double attainable = attainable_cost_bound(model, mu, reference);
  require(bound > attainable,
          "cost bound must exceed the attainable cost " + std::to_string(attainable));
  auto lowest_cost = [&](std::size_t i, double mi) {
    double best = std::numeric_limits<double>::infinity();
    for (auto& m : admissible_sizes(model, i, mi)) {
      best = std::min(best, min_cost_over_samples(model, mu, i, with_sizes(reference, m)));
    }
    return best;
  };
  std::vector<double> floors(n);
  const double top = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lo = 1e-12;
    double hi = top;
    if (!(lowest_cost(i, lo) > bound)) {
      fail(ErrorCode::assumption_violated,
           "costs of community " + std::to_string(i) +
               " do not diverge as its size vanishes (small-group floor does not exist)");
    }
    if (lowest_cost(i, hi) > bound) {
      floors[i] = hi;
      continue;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (lowest_cost(i, mid) > bound) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    floors[i] = lo;
  }
  return floors;
}

std::vector<double> small_group_floor(const CostModel& model, const SampledMeasure& mu,
                                      double bound) {
  return small_group_floor(
      model, mu, bound,
      NominalState::sizes_only(std::vector<double>(model.communities(),
                                                   1.0 / static_cast<double>(model.communities()))));
}

HyperbolaProbe probe_hyperbola_property(const CostModel& model, const SampledMeasure& mu,
                                        const NominalState& reference, double bin_width) {
  const std::size_t n = model.communities();
  HyperbolaProbe worst;
  if (n < 2) return worst;
  const double share = 1.0 / static_cast<double>(n);
  const double pair_total = 2.0 * share;
  const double lo_t = pair_total * 1e-4;
  const double hi_t = pair_total - lo_t;
  for (std::size_t i1 = 0; i1 < n; ++i1) {
    for (std::size_t i2 = i1 + 1; i2 < n; ++i2) {
      auto state_at = [&](double t) {
        std::vector<double> m(n, share);
        m[i1] = t;
        m[i2] = pair_total - t;
        return with_sizes(reference, std::move(m));
      };
      const NominalState lo_state = state_at(lo_t);
      const NominalState hi_state = state_at(hi_t);
      std::vector<std::pair<double, double>> roots;  // (size, weight)
      for (std::size_t j = 0; j < mu.type_count(); ++j) {
        const auto& t = mu.type(j);
        for (std::size_t s = 0; s < t.size(); ++s) {
          auto x = t.point(s);
          auto phi = [&](const NominalState& st) {
            return model.eval(j, i1, x, st) - model.eval(j, i2, x, st);
          };
          double a = lo_t, b = hi_t;
          double fa = phi(lo_state), fb = phi(hi_state);
          if (fa == 0.0) {
            roots.emplace_back(a, t.weights[s]);
            continue;
          }
          if ((fa > 0.0) == (fb > 0.0)) continue;
          for (int it = 0; it < 64; ++it) {
            const double mid = 0.5 * (a + b);
            const double fm = phi(state_at(mid));
            if ((fm > 0.0) == (fa > 0.0)) {
              a = mid;
              fa = fm;
            } else {
              b = mid;
            }
          }
          roots.emplace_back(0.5 * (a + b), t.weights[s]);
        }
      }
      std::sort(roots.begin(), roots.end());
      double window_mass = 0.0;
      std::size_t start = 0;
      for (std::size_t e = 0; e < roots.size(); ++e) {
        window_mass += roots[e].second;
        while (roots[e].first - roots[start].first > bin_width) {
          window_mass -= roots[start++].second;
        }
        if (window_mass > worst.clustered_mass) {
          worst.clustered_mass = window_mass;
          worst.i1 = i1;
          worst.i2 = i2;
          worst.m = state_at(roots[e].first).m;
        }
      }
    }
  }
  return worst;
}

}  // namespace tiebout

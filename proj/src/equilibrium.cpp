#include "tiebout/equilibrium.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "size_iteration.hpp"
#include "tiebout/error.hpp"
#include "tiebout/parallel.hpp"
#include "tiebout/random.hpp"

namespace tiebout {

double SolverConfig::initial_epsilon(std::size_t n) const {
  return std::max(epsilon_min, std::min(epsilon_floor, 0.2 / static_cast<double>(n)));
}

void SolverConfig::validate(std::size_t n) const {
  require(n >= 1, "solver needs at least one community");
  const double top = 1.0 / static_cast<double>(n);
  require(epsilon_min > 0.0 && epsilon_min <= epsilon_floor && (n == 1 || epsilon_floor < top),
          "solver floors must satisfy 0 < epsilon_min <= epsilon_floor < 1/n");
  require(epsilon_anneal > 0.0 && epsilon_anneal <= 1.0, "epsilon_anneal must lie in (0,1]");
  require(damping > 0.0 && damping <= 1.0, "damping must lie in (0,1]");
  require(tolerance > 0.0, "tolerance must be positive");
  require(target_residual > 0.0 && target_residual <= tolerance,
          "target_residual must lie in (0, tolerance]");
  require(max_iterations >= 1, "max_iterations must be positive");
  require(multistart >= 1, "multistart must be positive");
  require(provider_probe_points >= 2, "provider_probe_points must be at least 2");
}

std::string to_string(StartOutcome::Status status) {
  switch (status) {
    case StartOutcome::Status::converged: return "converged";
    case StartOutcome::Status::duplicate: return "duplicate";
    case StartOutcome::Status::no_convergence: return "no-convergence";
    case StartOutcome::Status::empty_community: return "empty-community";
    case StartOutcome::Status::cycling: return "cycling";
  }
  return "no-convergence";
}

std::vector<std::vector<double>> multistart_points(std::size_t n, std::size_t count,
                                                   double epsilon, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  constexpr double pull = 0.2;
  const double share = 1.0 / static_cast<double>(n);
  if (n > 1) {
    for (std::size_t i = 0; i < n && out.size() < count; ++i) {
      std::vector<double> m(n, pull * share);
      m[i] += 1.0 - pull;
      out.push_back(std::move(m));
    }
  }
  if (out.size() < count) out.emplace_back(n, share);
  Rng rng(seed);
  while (out.size() < count) out.push_back(rng.dirichlet(n));
  for (auto& m : out) m = project_to_restricted_simplex(m, epsilon);
  return out;
}

namespace detail {

NominalState with_m(const NominalState& base, std::vector<double> m) {
  NominalState s = base;
  s.m = std::move(m);
  return s;
}

NominalState at_realized_sizes(const NominalState& base, const std::vector<double>& sizes) {
  std::vector<double> m(sizes);
  for (double& x : m) x = std::max(x, 1e-300);
  return with_m(base, std::move(m));
}

namespace {

std::vector<double> residual_of(const std::vector<double>& f, const std::vector<double>& m) {
  std::vector<double> r(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) r[i] = f[i] - m[i];
  return r;
}

double sup(const std::vector<double>& r) {
  double s = 0.0;
  for (double x : r) s = std::max(s, std::abs(x));
  return s;
}

bool projection_active(const std::vector<double>& raw, const std::vector<double>& projected) {
  return sup_norm_distance(raw, projected) > 1e-14;
}

}  // namespace

SizeIteration iterate_sizes(const CostModel& model, const SampledMeasure& mu,
                            const NominalState& base, std::vector<double> start,
                            const SolverConfig& config, double epsilon,
                            std::size_t threads, std::size_t max_iterations) {
  const std::size_t n = model.communities();
  auto sizes = [&](const std::vector<double>& m) {
    return size_map(model, mu, with_m(base, m), threads);
  };
  SizeIteration out;
  double eps = epsilon;
  std::vector<double> m = project_to_restricted_simplex(start, eps);
  double alpha = config.damping;
  double radius = 0.05;
  double previous = std::numeric_limits<double>::infinity();
  std::size_t still = 0;
  std::size_t stagnant = 0;
  std::vector<double> f = sizes(m);
  std::vector<double> r = residual_of(f, m);
  double res = sup(r);
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    out.iterations = it;
    if (config.trace) out.trace.push_back(m);
    if (res <= config.target_residual || n == 1) break;
    const double next_eps = std::max(config.epsilon_min, eps * config.epsilon_anneal);
    std::vector<double> next;
    std::vector<double> next_f;
    double next_res = res;

    if (config.newton) {
      // Jacobian of the residual in the tangent coordinates m + t_a (e_a - e_last).
      const std::size_t d = n - 1;
      const double h = 1e-7;
      Eigen::MatrixXd jac(d, d);
      Eigen::VectorXd rhs(d);
      for (std::size_t a = 0; a < d; ++a) {
        double step = h;
        if (m[n - 1] - step <= 0.0) step = -h;
        std::vector<double> probe = m;
        probe[a] += step;
        probe[n - 1] -= step;
        const auto rp = residual_of(sizes(probe), probe);
        for (std::size_t b = 0; b < d; ++b) jac(b, a) = (rp[b] - r[b]) / step;
        rhs(a) = -r[a];
      }
      const Eigen::VectorXd t = jac.colPivHouseholderQr().solve(rhs);
      std::vector<double> delta(n, 0.0);
      for (std::size_t a = 0; a < d; ++a) {
        delta[a] = std::isfinite(t(a)) ? t(a) : 0.0;
        delta[n - 1] -= delta[a];
      }
      const double length = sup(delta);
      if (length > 0.0) {
        double scale = std::min(1.0, radius / length);
        for (int attempt = 0; attempt < 8; ++attempt, scale *= 0.5) {
          std::vector<double> raw(n);
          for (std::size_t i = 0; i < n; ++i) raw[i] = m[i] + scale * delta[i];
          auto candidate = project_to_restricted_simplex(raw, next_eps);
          if (projection_active(raw, candidate)) continue;
          auto cf = sizes(candidate);
          const double cres = sup(residual_of(cf, candidate));
          if (cres < (1.0 - 1e-4 * scale) * res) {
            next = std::move(candidate);
            next_f = std::move(cf);
            next_res = cres;
            if (attempt == 0) radius = std::min(0.5, 2.0 * radius);
            break;
          }
          radius = std::max(1e-6, 0.5 * radius);
        }
      }
    }
    if (next.empty()) {
      if (res > previous) alpha = std::max(alpha * 0.5, 1.0 / 64.0);
      std::vector<double> raw(n);
      for (std::size_t i = 0; i < n; ++i) raw[i] = (1.0 - alpha) * m[i] + alpha * f[i];
      next = project_to_restricted_simplex(raw, next_eps);
      next_f = sizes(next);
      next_res = sup(residual_of(next_f, next));
    }
    still = sup_norm_distance(next, m) < 1e-15 ? still + 1 : 0;
    // Below tolerance, stop once rounding noise keeps the residual from halving.
    stagnant = res <= config.tolerance && next_res > 0.5 * res ? stagnant + 1 : 0;
    previous = res;
    m = std::move(next);
    f = std::move(next_f);
    r = residual_of(f, m);
    res = next_res;
    eps = next_eps;
    if (still >= 3 || stagnant >= 3) break;
  }
  out.m = std::move(m);
  out.residual = res;
  out.epsilon = eps;
  return out;
}

}  // namespace detail

double agent_max_regret(const CostModel& model, const SampledMeasure& mu,
                        const Partition& partition, const NominalState& at) {
  const std::size_t n = model.communities();
  double worst = 0.0;
  std::vector<double> cost(n);
  std::vector<std::optional<Point>> grad(n);
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t base = mu.offset(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      auto x = t.point(s);
      bool computed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (partition.fraction(base + s, i) <= 0.0) continue;
        if (!computed) {
          for (std::size_t k = 0; k < n; ++k) {
            cost[k] = model.eval(j, k, x, at);
            grad[k] = t.has_cells() ? model.try_grad_x(j, k, x, at) : std::nullopt;
          }
          computed = true;
        }
        for (std::size_t k = 0; k < n; ++k) {
          if (k == i) continue;
          double reach = 0.0;
          if (grad[i] && grad[k]) {
            for (std::size_t a = 0; a < t.dimension(); ++a) {
              reach += std::abs((*grad[i])[a] - (*grad[k])[a]) * t.half_widths[a];
            }
          }
          worst = std::max(worst, cost[i] - cost[k] - reach);
        }
      }
    }
  }
  return worst;
}

SolveResult solve_basic(const CostModel& model, const SampledMeasure& mu,
                        const SolverConfig& config) {
  const std::size_t n = model.communities();
  config.validate(n);
  require(!model.flags().depends_on_characteristics && !model.flags().depends_on_provider_params,
          "the basic solver needs a cost model without characteristics or provider parameters");
  SolveResult result;
  const NominalState base = NominalState::sizes_only(std::vector<double>(n, 1.0 / n));
  try {
    const double bound = 2.0 * attainable_cost_bound(model, mu, base);
    result.small_group_floor = small_group_floor(model, mu, bound, base);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::assumption_violated) throw;
    fail(ErrorCode::assumption2_unverified, e.what());
  }

  const double eps0 = config.initial_epsilon(n);
  std::vector<std::vector<double>> starts;
  if (config.size_starts.empty()) {
    starts = multistart_points(n, config.multistart, eps0, config.seed);
  } else {
    for (const auto& m : config.size_starts) {
      require(m.size() == n, "size start has the wrong number of communities");
      starts.push_back(project_to_restricted_simplex(m, eps0));
    }
  }
  std::vector<detail::SizeIteration> runs(starts.size());
  const std::size_t outer = std::min(config.threads, starts.size());
  const std::size_t inner = outer > 1 ? 1 : config.threads;
  parallel_for(starts.size(), outer, [&](std::size_t k) {
    runs[k] = detail::iterate_sizes(model, mu, base, starts[k], config, eps0, inner,
                                    config.max_iterations);
  });

  for (std::size_t k = 0; k < starts.size(); ++k) {
    const auto& run = runs[k];
    StartOutcome outcome;
    outcome.start_index = k;
    outcome.start = starts[k];
    outcome.final_m = run.m;
    outcome.residual = run.residual;
    outcome.iterations = run.iterations;

    const bool interior = std::all_of(run.m.begin(), run.m.end(),
                                      [&](double x) { return x > config.epsilon_min; });
    bool accepted = run.residual <= config.tolerance && interior;
    if (!accepted && config.allow_empty && !interior &&
        run.residual <= config.tolerance + run.epsilon) {
      accepted = true;
    }
    if (!accepted) {
      outcome.status = run.residual <= config.tolerance + run.epsilon && !interior
                           ? StartOutcome::Status::empty_community
                           : StartOutcome::Status::no_convergence;
      result.starts.push_back(std::move(outcome));
      continue;
    }
    bool duplicate = false;
    for (const auto& eq : result.equilibria) {
      if (sup_norm_distance(eq.state.m, run.m) <= 10.0 * config.tolerance) {
        duplicate = true;
        outcome.detail = "same as start " + std::to_string(eq.start_index);
        break;
      }
    }
    outcome.status =
        duplicate ? StartOutcome::Status::duplicate : StartOutcome::Status::converged;
    if (!duplicate) {
      EquilibriumReport report;
      report.state = detail::with_m(base, run.m);
      report.state.epsilon = run.epsilon;
      report.partition = assign(model, mu, report.state, config.threads);
      report.residuals.size = sup_norm_distance(report.partition.sizes, run.m);
      report.residuals.agent_max_regret = agent_max_regret(
          model, mu, report.partition,
          detail::at_realized_sizes(report.state, report.partition.sizes));
      report.all_nonempty = interior;
      report.iterations = run.iterations;
      report.start_index = k;
      report.trace = run.trace;
      result.equilibria.push_back(std::move(report));
    }
    result.starts.push_back(std::move(outcome));
  }
  if (result.equilibria.empty()) {
    fail(ErrorCode::no_convergence,
         "no start converged within " + std::to_string(config.max_iterations) + " iterations");
  }
  return result;
}

Residuals verify_equilibrium(const CostModel& model, const SampledMeasure& mu,
                             const EquilibriumReport& report, const ExtendedSpec* extended,
                             std::size_t probe_points, std::size_t threads) {
  Residuals out;
  const Partition p = assign(model, mu, report.state, threads);
  out.size = sup_norm_distance(p.sizes, report.state.m);
  NominalState realized = detail::at_realized_sizes(report.state, p.sizes);
  if (extended != nullptr) {
    auto spec = extended->characteristics;
    if (mu.type_count() > 1) spec = spec.with_type_shares(mu.type_count());
    if (spec.layout().total() > 0) {
      const auto fv = realized_characteristics(p, spec, mu, extended->mean_guard);
      out.characteristic = sup_norm_distance(fv, report.state.v);
      realized.v = fv;
    }
  }
  out.agent_max_regret = agent_max_regret(model, mu, p, realized);
  if (extended != nullptr && !extended->providers.empty()) {
    out.provider_max_regret = provider_max_regret(*extended, realized, probe_points);
  }
  return out;
}

KkmResult kkm_oracle(const CostModel& model, const SampledMeasure& mu, double epsilon,
                     std::size_t depth, std::size_t threads) {
  const std::size_t n = model.communities();
  require(n >= 1 && n <= 4, "the Sperner search supports at most 4 communities");
  require(depth >= 1, "grid depth must be positive");
  require(epsilon >= 0.0 && static_cast<double>(n) * epsilon < 1.0,
          "floor too large for the community count");
  KkmResult result;
  result.depth = depth;
  result.epsilon = epsilon;
  const NominalState base = NominalState::sizes_only(std::vector<double>(n, 1.0 / n));
  try {
    small_group_floor(model, mu, 2.0 * attainable_cost_bound(model, mu, base), base);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::assumption_violated) throw;
    result.assumption2_violated = true;
    result.note = e.what();
  }

  // Vertices are monotone partial sums 0 <= y_1 <= ... <= y_{n-1} <= depth.
  const std::size_t d = n - 1;
  using Key = std::vector<std::size_t>;
  std::vector<Key> vertices;
  Key y(d, 0);
  std::function<void(std::size_t, std::size_t)> enumerate = [&](std::size_t r, std::size_t lo) {
    if (r == d) {
      vertices.push_back(y);
      return;
    }
    for (std::size_t v = lo; v <= depth; ++v) {
      y[r] = v;
      enumerate(r + 1, v);
    }
  };
  enumerate(0, 0);
  const double D = static_cast<double>(depth);
  auto to_sizes = [&](const Key& key) {
    std::vector<double> m(n);
    std::size_t prev = 0;
    for (std::size_t r = 0; r < d; ++r) {
      m[r] = static_cast<double>(key[r] - prev);
      prev = key[r];
    }
    m[n - 1] = static_cast<double>(depth - prev);
    for (double& x : m) x = epsilon + (1.0 - static_cast<double>(n) * epsilon) * x / D;
    return m;
  };
  std::vector<std::size_t> labels(vertices.size());
  parallel_for(vertices.size(), threads, [&](std::size_t k) {
    const auto m = to_sizes(vertices[k]);
    const auto f = size_map(model, mu, detail::with_m(base, m));
    std::size_t label = n;
    for (std::size_t i = 0; i < n && label == n; ++i) {
      if (f[i] >= m[i]) label = i;
    }
    if (label == n) {
      label = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (f[i] - m[i] > f[label] - m[label]) label = i;
      }
    }
    labels[k] = label;
  });
  std::map<Key, std::size_t> index;
  for (std::size_t k = 0; k < vertices.size(); ++k) index.emplace(vertices[k], k);

  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<std::size_t>> perms;
  do perms.push_back(perm); while (std::next_permutation(perm.begin(), perm.end()));
  if (d == 0) perms.assign(1, {});

  bool all_boundary = true;
  for (const auto& start : vertices) {
    for (const auto& order : perms) {
      std::vector<std::size_t> corner{index.at(start)};
      Key v = start;
      bool valid = true;
      for (std::size_t axis : order) {
        v[axis] += 1;
        auto it = index.find(v);
        if (it == index.end()) {
          valid = false;
          break;
        }
        corner.push_back(it->second);
      }
      if (!valid) continue;
      std::vector<bool> seen(n, false);
      for (auto c : corner) seen[labels[c]] = true;
      if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) continue;
      KkmCell cell;
      bool touches = false;
      for (auto c : corner) {
        cell.vertices.push_back(to_sizes(vertices[c]));
        cell.labels.push_back(labels[c]);
        for (double x : cell.vertices.back()) {
          if (x <= epsilon + 1e-15) touches = true;
        }
      }
      all_boundary = all_boundary && touches;
      result.cells.push_back(std::move(cell));
    }
  }
  if (result.cells.empty()) {
    fail(ErrorCode::no_fully_labeled_cell,
         "no fully labelled cell at depth " + std::to_string(depth));
  }
  result.boundary_only = all_boundary;
  if (all_boundary) {
    if (!result.note.empty()) result.note += "; ";
    result.note += "every fully labelled cell touches the boundary of the restricted simplex";
  }
  return result;
}

}  // namespace tiebout

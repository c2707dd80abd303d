#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "wmfgp/errors.hpp"
#include "wmfgp/linalg.hpp"

namespace wmfgp {

/// Objective returning f(x); fills `grad` when it is non-null.
/// Throwing `wmfgp::Error` marks the point as infeasible.
using Objective = std::function<double(const Vector &x, Vector *grad)>;

struct Box {
  Vector lower;
  Vector upper;

  Eigen::Index size() const { return lower.size(); }

  Vector clamp(const Vector &x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }
};

struct OptimizerConfig {
  /// Latin-hypercube start points drawn inside the box.
  int starts = 8;
  /// Number of best-ranked start points refined by BFGS.
  int local_searches = 3;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double relative_tolerance = 1e-10;
  /// Cap on the max-norm of a single step (in optimizer coordinates).
  double max_step = 2.0;
  std::uint64_t seed = 0;
};

struct OptimizationResult {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
  /// Objective at every start point (infinite where evaluation failed).
  std::vector<double> start_values;
  int failed_starts = 0;
};

namespace detail {

inline double safe_eval(const Objective &f, const Vector &x, Vector *grad,
                        int &evals) {
  ++evals;
  try {
    const double v = f(x, grad);
    if (!std::isfinite(v) || (grad != nullptr && !grad->allFinite())) {
      return std::numeric_limits<double>::infinity();
    }
    return v;
  } catch (const Error &) {
    return std::numeric_limits<double>::infinity();
  }
}

inline Vector projected_gradient(const Vector &x, const Vector &g,
                                 const Box &box) {
  Vector pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= box.lower[i] && g[i] > 0.0) ||
        (x[i] >= box.upper[i] && g[i] < 0.0)) {
      pg[i] = 0.0;
    }
  }
  return pg;
}

} // namespace detail

/// Box-constrained BFGS with projected backtracking (Armijo) line search.
inline OptimizationResult minimize_bfgs(const Objective &f, const Vector &start,
                                        const Box &box,
                                        const OptimizerConfig &cfg = {}) {
  const Eigen::Index n = start.size();
  OptimizationResult res;
  Vector x = box.clamp(start);
  Vector g(n);
  double fx = detail::safe_eval(f, x, &g, res.evaluations);
  res.x = x;
  res.value = fx;
  if (!std::isfinite(fx)) {
    return res;
  }

  Matrix h = Matrix::Identity(n, n);
  bool h_is_identity = true;
  int slow_steps = 0;
  Vector g_new(n);

  for (int it = 0; it < cfg.max_iterations; ++it) {
    res.iterations = it + 1;
    const Vector pg = detail::projected_gradient(x, g, box);
    if (pg.lpNorm<Eigen::Infinity>() < cfg.gradient_tolerance) {
      res.converged = true;
      break;
    }

    Vector d = -(h * pg);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pg[i] == 0.0) {
        d[i] = 0.0;
      }
    }
    if (d.dot(pg) >= 0.0) {
      h.setIdentity();
      h_is_identity = true;
      d = -pg;
    }
    const double dmax = d.lpNorm<Eigen::Infinity>();
    if (dmax > cfg.max_step) {
      d *= cfg.max_step / dmax;
    }

    double t = 1.0;
    bool accepted = false;
    Vector x_new(n);
    double f_new = fx;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = box.clamp(x + t * d);
      const double decrease = g.dot(x_new - x);
      f_new = detail::safe_eval(f, x_new, &g_new, res.evaluations);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * std::min(decrease, 0.0)) {
        accepted = (x_new - x).lpNorm<Eigen::Infinity>() > 0.0;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || !(f_new <= fx)) {
      if (!h_is_identity) {
        h.setIdentity();
        h_is_identity = true;
        continue;
      }
      res.converged = true;
      break;
    }

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (h_is_identity) {
        h *= sy / y.squaredNorm();
      }
      const double r = 1.0 / sy;
      const Vector hy = h * y;
      h += (r * r * y.dot(hy) + r) * (s * s.transpose()) -
           r * (hy * s.transpose() + s * hy.transpose());
      h_is_identity = false;
    }

    const double rel = (fx - f_new) / std::max({std::abs(fx), std::abs(f_new), 1.0});
    x = x_new;
    g = g_new;
    fx = f_new;
    slow_steps = rel < cfg.relative_tolerance ? slow_steps + 1 : 0;
    if (slow_steps >= 2) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  return res;
}

/// `count` stratified points in the box, one per stratum along each axis.
inline std::vector<Vector> latin_hypercube(const Box &box, int count,
                                           std::mt19937_64 &rng) {
  const Eigen::Index dim = box.size();
  std::vector<Vector> pts(static_cast<std::size_t>(count), Vector(dim));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> perm(static_cast<std::size_t>(count));
  for (Eigen::Index d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < count; ++i) {
      const double u = (perm[static_cast<std::size_t>(i)] + unif(rng)) / count;
      pts[static_cast<std::size_t>(i)][d] =
          box.lower[d] + u * (box.upper[d] - box.lower[d]);
    }
  }
  return pts;
}

/// Multi-start minimization. Every start is scored first; the
/// `local_searches` best are refined by BFGS. The result is never worse
/// than any start point.
///
/// Latin-hypercube starts are drawn from `start_box` when given, which may be
/// narrower than the feasible `box`.
inline OptimizationResult
multistart_minimize(const Objective &f, const Box &box,
                    const std::vector<Vector> &extra_starts,
                    const OptimizerConfig &cfg = {},
                    const std::optional<Box> &start_box = std::nullopt) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<Vector> starts = extra_starts;
  for (auto &s : latin_hypercube(start_box ? *start_box : box, cfg.starts, rng)) {
    starts.push_back(std::move(s));
  }

  OptimizationResult best;
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    starts[i] = box.clamp(starts[i]);
    const double v = detail::safe_eval(f, starts[i], nullptr, best.evaluations);
    best.start_values.push_back(v);
    if (std::isfinite(v)) {
      ranked.emplace_back(v, i);
      if (v < best.value) {
        best.value = v;
        best.x = starts[i];
      }
    } else {
      ++best.failed_starts;
    }
  }
  if (ranked.empty()) {
    throw FitFailure("all optimizer start points failed numerically");
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto &a, const auto &b) { return a.first < b.first; });

  const auto searches =
      std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(cfg.local_searches, 1)));
  for (std::size_t r = 0; r < searches; ++r) {
    auto local = minimize_bfgs(f, starts[ranked[r].second], box, cfg);
    best.evaluations += local.evaluations;
    best.iterations += local.iterations;
    if (local.value < best.value) {
      best.value = local.value;
      best.x = local.x;
      best.converged = local.converged;
    }
  }
  return best;
}

} // namespace wmfgp

#include "sparsestruct/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace sparsestruct {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 40;

std::vector<bool> binding_set(const VectorX<double>& x, const VectorX<double>& g,
                              const VectorX<double>& lower, double eps) {
  std::vector<bool> bound(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    bound[i] = (x[i] - lower[i] <= eps) && g[i] > 0.0;
  return bound;
}

struct LineSearchResult {
  bool ok = false;
  VectorX<double> x;
  VectorX<double> g;
  VectorX<double> diag;
  double f = 0.0;
};

LineSearchResult projected_backtrack(const BoundedProblem& p, const VectorX<double>& x,
                                     double f, const VectorX<double>& g,
                                     const VectorX<double>& d, double alpha) {
  LineSearchResult r;
  for (int k = 0; k < kMaxBacktracks; ++k, alpha *= 0.5) {
    VectorX<double> xn = project(x + alpha * d, p.lower);
    const VectorX<double> step = xn - x;
    if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
    VectorX<double> gn(x.size());
    VectorX<double> dn;
    const double fn = p.evaluate(xn, &gn, nullptr, p.has_diagonal ? &dn : nullptr);
    if (std::isfinite(fn) && fn <= f + kArmijo * g.dot(step)) {
      r.ok = true;
      r.x = std::move(xn);
      r.g = std::move(gn);
      r.diag = std::move(dn);
      r.f = fn;
      return r;
    }
  }
  return r;
}

}  // namespace

VectorX<double> project(const VectorX<double>& x, const VectorX<double>& lower) {
  return x.cwiseMax(lower);
}

double projected_gradient_norm(const VectorX<double>& x, const VectorX<double>& g,
                               const VectorX<double>& lower) {
  return (project(x - g, lower) - x).lpNorm<Eigen::Infinity>();
}

MinimizeResult projected_lbfgs(const BoundedProblem& problem, const VectorX<double>& x0,
                               const MinimizeOptions& options) {
  MinimizeResult res;
  const Eigen::Index n = x0.size();
  VectorX<double> x = project(x0, problem.lower);
  VectorX<double> g(n);
  VectorX<double> diag;
  double f = problem.evaluate(x, &g, nullptr, problem.has_diagonal ? &diag : nullptr);
  res.history.push_back(f);
  // Inverse of the initial metric: the Hessian diagonal when available.
  auto precondition = [&](const VectorX<double>& v) -> VectorX<double> {
    if (!problem.has_diagonal) return v;
    const double floor = 1e-12 * std::max(1.0, diag.cwiseAbs().maxCoeff());
    return v.cwiseQuotient(diag.cwiseMax(floor));
  };

  std::deque<VectorX<double>> s_hist;
  std::deque<VectorX<double>> y_hist;

  for (int it = 0; it < options.max_iters; ++it) {
    res.pg_norm = projected_gradient_norm(x, g, problem.lower);
    if (res.pg_norm < options.pg_tol) {
      res.converged = true;
      break;
    }
    const double eps = std::min(1e-8, res.pg_norm);
    const std::vector<bool> bound = binding_set(x, g, problem.lower, eps);
    auto mask_free = [&](VectorX<double> v) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (bound[i]) v[i] = 0.0;
      return v;
    };

    // Two-loop recursion on the free subspace.
    VectorX<double> q = mask_free(g);
    const std::size_t k = s_hist.size();
    std::vector<double> alpha(k);
    std::vector<double> rho(k);
    std::vector<VectorX<double>> sf(k);
    std::vector<VectorX<double>> yf(k);
    bool usable = k > 0;
    for (std::size_t i = 0; i < k; ++i) {
      sf[i] = mask_free(s_hist[i]);
      yf[i] = mask_free(y_hist[i]);
      const double sy = sf[i].dot(yf[i]);
      if (sy <= 1e-16) {
        usable = false;
        break;
      }
      rho[i] = 1.0 / sy;
    }
    VectorX<double> d;
    if (usable) {
      for (std::size_t i = k; i-- > 0;) {
        alpha[i] = rho[i] * sf[i].dot(q);
        q -= alpha[i] * yf[i];
      }
      if (problem.has_diagonal) {
        q = mask_free(precondition(q));
      } else {
        q *= sf[k - 1].dot(yf[k - 1]) / yf[k - 1].squaredNorm();
      }
      for (std::size_t i = 0; i < k; ++i) {
        const double beta = rho[i] * yf[i].dot(q);
        q += sf[i] * (alpha[i] - beta);
      }
      d = -mask_free(q);
    }
    auto fallback_step = [&] {
      d = -mask_free(precondition(g));
      return problem.has_diagonal
                 ? 1.0
                 : std::min(1.0, 1.0 / std::max(1e-12, d.lpNorm<Eigen::Infinity>()));
    };
    double step0 = 1.0;
    if (!usable || g.dot(d) >= 0.0) {
      s_hist.clear();
      y_hist.clear();
      step0 = fallback_step();
      usable = false;
    }

    LineSearchResult ls = projected_backtrack(problem, x, f, g, d, step0);
    if (!ls.ok && usable) {
      s_hist.clear();
      y_hist.clear();
      ls = projected_backtrack(problem, x, f, g, d, fallback_step());
    }
    if (!ls.ok) break;

    VectorX<double> s = ls.x - x;
    VectorX<double> y = ls.g - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    x = std::move(ls.x);
    g = std::move(ls.g);
    diag = std::move(ls.diag);
    f = ls.f;
    res.history.push_back(f);
    res.iterations = it + 1;
  }
  res.pg_norm = projected_gradient_norm(x, g, problem.lower);
  if (res.pg_norm < options.pg_tol) res.converged = true;
  res.x = std::move(x);
  res.f = f;
  return res;
}

MinimizeResult projected_newton(const BoundedProblem& problem, const VectorX<double>& x0,
                                const MinimizeOptions& options) {
  MinimizeResult res;
  const Eigen::Index n = x0.size();
  VectorX<double> x = project(x0, problem.lower);
  VectorX<double> g(n);
  MatrixX<double> h(n, n);
  double f = problem.evaluate(x, &g, &h, nullptr);
  res.history.push_back(f);

  for (int it = 0; it < options.max_iters; ++it) {
    res.pg_norm = projected_gradient_norm(x, g, problem.lower);
    if (res.pg_norm < options.pg_tol) {
      res.converged = true;
      break;
    }
    const double eps = std::min(1e-8, res.pg_norm);
    const std::vector<bool> bound = binding_set(x, g, problem.lower, eps);
    std::vector<int> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!bound[i]) free.push_back(static_cast<int>(i));

    VectorX<double> d = VectorX<double>::Zero(n);
    if (!free.empty()) {
      MatrixX<double> hf = h(free, free);
      const VectorX<double> gf = g(free);
      double shift = 0.0;
      const double scale = std::max(1e-12, hf.diagonal().cwiseAbs().maxCoeff());
      for (int attempt = 0; attempt < 12; ++attempt) {
        Eigen::LLT<MatrixX<double>> llt(hf);
        if (llt.info() == Eigen::Success) {
          d(free) = -llt.solve(gf);
          break;
        }
        shift = shift == 0.0 ? 1e-10 * scale : shift * 10.0;
        hf.diagonal().array() += shift;
      }
    }
    if (g.dot(d) >= 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) d[i] = bound[i] ? 0.0 : -g[i];
    }
    LineSearchResult ls = projected_backtrack(problem, x, f, g, d, 1.0);
    if (!ls.ok) break;
    x = std::move(ls.x);
    f = problem.evaluate(x, &g, &h, nullptr);
    res.history.push_back(f);
    res.iterations = it + 1;
  }
  res.pg_norm = projected_gradient_norm(x, g, problem.lower);
  if (res.pg_norm < options.pg_tol) res.converged = true;
  res.x = std::move(x);
  res.f = f;
  return res;
}

}  // namespace sparsestruct

#ifndef SPARSESTRUCT_OPTIM_HPP_
#define SPARSESTRUCT_OPTIM_HPP_

#include <functional>
#include <vector>

#include "sparsestruct/common.hpp"

namespace sparsestruct {

/// Smooth objective on the box x >= lower. evaluate(x, grad, hess, diag)
/// returns f(x) and fills each output that is non-null; `diag` is the Hessian
/// diagonal, used to precondition L-BFGS.
struct BoundedProblem {
  std::function<double(const VectorX<double>&, VectorX<double>*, MatrixX<double>*,
                       VectorX<double>*)>
      evaluate;
  VectorX<double> lower;
  bool has_diagonal = false;
};

struct MinimizeOptions {
  int max_iters = 500;
  double pg_tol = 1e-6;  // infinity norm of the projected gradient
  int memory = 10;       // L-BFGS pairs
};

struct MinimizeResult {
  VectorX<double> x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  double pg_norm = 0.0;
  std::vector<double> history;  // f at every accepted iterate, x0 first
};

VectorX<double> project(const VectorX<double>& x, const VectorX<double>& lower);

/// ||P(x - g) - x||_inf.
double projected_gradient_norm(const VectorX<double>& x, const VectorX<double>& g,
                               const VectorX<double>& lower);

/// Two-metric projected L-BFGS with Armijo backtracking along the projection
/// arc. Variables at their bound with a positive gradient are held fixed;
/// the quasi-Newton direction acts on the rest. f is non-increasing. When the
/// problem supplies a Hessian diagonal it seeds the two-loop recursion.
MinimizeResult projected_lbfgs(const BoundedProblem& problem, const VectorX<double>& x0,
                               const MinimizeOptions& options = {});

/// Projected Newton with the exact Hessian restricted to the free variables.
MinimizeResult projected_newton(const BoundedProblem& problem, const VectorX<double>& x0,
                                const MinimizeOptions& options = {});

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_OPTIM_HPP_

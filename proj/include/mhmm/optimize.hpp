#pragma once

#include <functional>
#include <vector>

// Dense quasi-Newton machinery for the marginal likelihood: BFGS with
// backtracking line search over finite-difference gradients, plus the
// finite-difference Hessian and the small symmetric linear algebra needed
// for observed-information standard errors.

namespace mhmm::optim {

using Objective = std::function<double(const std::vector<double>&)>;

// Central differences, per-coordinate relative step `rel_step`.
std::vector<double> fd_gradient(const Objective& f, const std::vector<double>& x,
                                double rel_step = 1e-5);

// Central-difference Hessian (symmetric), per-coordinate relative step.
std::vector<double> fd_hessian(const Objective& f, const std::vector<double>& x,
                               double rel_step = 1e-2);

struct BfgsOptions {
  int max_iters = 200;
  double grad_tol = 1e-4;      // infinity norm of the gradient
  double step_tol = 1e-12;     // line search collapse threshold
  double fd_rel_step = 1e-5;
  // Optional k*k inverse-Hessian carried in and out across calls, so an
  // outer loop that repeatedly re-minimizes a slowly changing objective
  // does not pay for rebuilding curvature from scratch.
  std::vector<double>* H_io = nullptr;
};

struct BfgsResult {
  std::vector<double> x;
  double f = 0.0;
  int iters = 0;
  bool converged = false;
  long n_evals = 0;
};

// Minimizes f. Non-finite objective values are treated as rejected trial
// points, never propagated.
BfgsResult bfgs_minimize(const Objective& f, std::vector<double> x0,
                         const BfgsOptions& opts = {});

// ---- small dense symmetric helpers (row-major k*k) ----

// In-place Cholesky lower factor; returns false if not positive definite.
bool cholesky(std::vector<double>& a, int k);

// Inverse of an SPD matrix via Cholesky; returns false on failure.
bool invert_spd(const std::vector<double>& a, int k, std::vector<double>& inv);

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
// On return `values` holds eigenvalues, `vectors` the column eigenvectors.
void jacobi_eigen(const std::vector<double>& a, int k,
                  std::vector<double>& values, std::vector<double>& vectors);

// Clips eigenvalues below eps*max(|eig|) upward; returns true if any clip
// happened (the nearest-PSD projection used for ill-behaved Hessians).
bool project_psd(std::vector<double>& a, int k, double rel_floor = 1e-10);

}  // namespace mhmm::optim

#include "mhmm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mhmm::optim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

inline double safe_eval(const Objective& f, const std::vector<double>& x,
                        long& n_evals) {
  ++n_evals;
  const double v = f(x);
  return std::isfinite(v) ? v : kInf;
}
}  // namespace

std::vector<double> fd_gradient(const Objective& f, const std::vector<double>& x,
                                double rel_step) {
  const int k = static_cast<int>(x.size());
  std::vector<double> g(k), xp = x;
  for (int i = 0; i < k; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

std::vector<double> fd_hessian(const Objective& f, const std::vector<double>& x,
                               double rel_step) {
  const int k = static_cast<int>(x.size());
  std::vector<double> h(k);
  for (int i = 0; i < k; ++i) h[i] = rel_step * std::max(1.0, std::abs(x[i]));

  std::vector<double> H(static_cast<std::size_t>(k) * k, 0.0);
  std::vector<double> xp = x;
  const double f0 = f(x);

  for (int i = 0; i < k; ++i) {
    const double xi = x[i];
    xp[i] = xi + h[i];
    const double fp = f(xp);
    xp[i] = xi - h[i];
    const double fm = f(xp);
    xp[i] = xi;
    H[i * k + i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double xi = x[i], xj = x[j];
      xp[i] = xi + h[i];
      xp[j] = xj + h[j];
      const double fpp = f(xp);
      xp[j] = xj - h[j];
      const double fpm = f(xp);
      xp[i] = xi - h[i];
      const double fmm = f(xp);
      xp[j] = xj + h[j];
      const double fmp = f(xp);
      xp[i] = xi;
      xp[j] = xj;
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
      H[i * k + j] = v;
      H[j * k + i] = v;
    }
  }
  return H;
}

BfgsResult bfgs_minimize(const Objective& f, std::vector<double> x0,
                         const BfgsOptions& opts) {
  const int k = static_cast<int>(x0.size());
  BfgsResult res;
  res.x = std::move(x0);
  res.f = safe_eval(f, res.x, res.n_evals);
  if (!std::isfinite(res.f)) return res;  // hopeless start

  // inverse Hessian approximation
  std::vector<double> H(static_cast<std::size_t>(k) * k, 0.0);
  bool first_update = true;
  if (opts.H_io && opts.H_io->size() == H.size()) {
    H = *opts.H_io;
    first_update = false;
  } else {
    for (int i = 0; i < k; ++i) H[i * k + i] = 1.0;
  }
  struct HSaver {
    const BfgsOptions& opts;
    std::vector<double>& H;
    ~HSaver() {
      if (opts.H_io) *opts.H_io = H;
    }
  } h_saver{opts, H};

  auto grad = [&](const std::vector<double>& x) {
    res.n_evals += 2 * k;
    return fd_gradient(f, x, opts.fd_rel_step);
  };

  std::vector<double> g = grad(res.x);
  std::vector<double> d(k), xn(k), gn(k), s(k), y(k), Hy(k);
  int stall_count = 0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    res.iters = iter;
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (gmax <= opts.grad_tol) {
      res.converged = true;
      return res;
    }

    for (int i = 0; i < k; ++i) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += H[i * k + j] * g[j];
      d[i] = -acc;
    }
    double dg = 0.0;
    for (int i = 0; i < k; ++i) dg += d[i] * g[i];
    if (!(dg < 0.0)) {
      // not a descent direction; reset to steepest descent
      std::fill(H.begin(), H.end(), 0.0);
      for (int i = 0; i < k; ++i) H[i * k + i] = 1.0;
      for (int i = 0; i < k; ++i) d[i] = -g[i];
      dg = 0.0;
      for (int i = 0; i < k; ++i) dg += d[i] * g[i];
      if (!(dg < 0.0)) {
        res.converged = true;  // zero gradient
        return res;
      }
      first_update = true;
    }

    // Armijo backtracking from the quasi-Newton unit step
    const double c1 = 1e-4;
    double t = 1.0;
    double fn = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int i = 0; i < k; ++i) xn[i] = res.x[i] + t * d[i];
      fn = safe_eval(f, xn, res.n_evals);
      if (fn <= res.f + c1 * t * dg) {
        accepted = true;
        break;
      }
      t *= 0.5;
      if (t < opts.step_tol) break;
    }
    if (!accepted) {
      // no progress possible along d
      res.converged = gmax <= 10.0 * opts.grad_tol;
      return res;
    }

    gn = grad(xn);
    double sy = 0.0;
    for (int i = 0; i < k; ++i) {
      s[i] = xn[i] - res.x[i];
      y[i] = gn[i] - g[i];
      sy += s[i] * y[i];
    }

    const double f_change = res.f - fn;
    res.x = xn;
    res.f = fn;
    g = gn;

    // improvements below floating-point resolution of f cannot accumulate;
    // three in a row means we are polishing noise
    if (f_change <= 1e-13 * std::max(1.0, std::abs(res.f))) {
      if (++stall_count >= 3) {
        double gm = 0.0;
        for (double v : g) gm = std::max(gm, std::abs(v));
        res.converged = gm <= 10.0 * opts.grad_tol;
        return res;
      }
    } else {
      stall_count = 0;
    }

    double ss = 0.0, yy = 0.0;
    for (int i = 0; i < k; ++i) {
      ss += s[i] * s[i];
      yy += y[i] * y[i];
    }
    if (sy > 1e-12 * std::sqrt(ss * yy)) {
      if (first_update) {
        // Nocedal-Wright initial scaling before the first update
        const double gamma = sy / yy;
        std::fill(H.begin(), H.end(), 0.0);
        for (int i = 0; i < k; ++i) H[i * k + i] = gamma;
        first_update = false;
      }
      for (int i = 0; i < k; ++i) {
        double acc = 0.0;
        for (int j = 0; j < k; ++j) acc += H[i * k + j] * y[j];
        Hy[i] = acc;
      }
      double yHy = 0.0;
      for (int i = 0; i < k; ++i) yHy += y[i] * Hy[i];
      const double rho = 1.0 / sy;
      const double a = (1.0 + rho * yHy) * rho;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
          H[i * k + j] += a * s[i] * s[j] -
                          rho * (s[i] * Hy[j] + Hy[i] * s[j]);
    }

  }
  return res;
}

bool cholesky(std::vector<double>& a, int k) {
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[i * k + j];
      for (int m = 0; m < j; ++m) sum -= a[i * k + m] * a[j * k + m];
      if (i == j) {
        if (!(sum > 0.0)) return false;
        a[i * k + i] = std::sqrt(sum);
      } else {
        a[i * k + j] = sum / a[j * k + j];
      }
    }
    for (int j = i + 1; j < k; ++j) a[i * k + j] = 0.0;
  }
  return true;
}

bool invert_spd(const std::vector<double>& a, int k, std::vector<double>& inv) {
  std::vector<double> L = a;
  if (!cholesky(L, k)) return false;

  // invert L in place, then inv = L^-T L^-1
  std::vector<double> Li(static_cast<std::size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) {
    Li[i * k + i] = 1.0 / L[i * k + i];
    for (int j = 0; j < i; ++j) {
      double sum = 0.0;
      for (int m = j; m < i; ++m) sum += L[i * k + m] * Li[m * k + j];
      Li[i * k + j] = -sum / L[i * k + i];
    }
  }
  inv.assign(static_cast<std::size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) {
      double sum = 0.0;
      for (int m = i; m < k; ++m) sum += Li[m * k + i] * Li[m * k + j];
      inv[i * k + j] = sum;
      inv[j * k + i] = sum;
    }
  return true;
}

void jacobi_eigen(const std::vector<double>& a, int k,
                  std::vector<double>& values, std::vector<double>& vectors) {
  std::vector<double> A = a;
  vectors.assign(static_cast<std::size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) vectors[i * k + i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) off += A[i * k + j] * A[i * k + j];
    if (off < 1e-26) break;
    for (int p = 0; p < k; ++p) {
      for (int q = p + 1; q < k; ++q) {
        if (std::abs(A[p * k + q]) < 1e-300) continue;
        const double theta = (A[q * k + q] - A[p * k + p]) / (2.0 * A[p * k + q]);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < k; ++i) {
          const double aip = A[i * k + p], aiq = A[i * k + q];
          A[i * k + p] = c * aip - s * aiq;
          A[i * k + q] = s * aip + c * aiq;
        }
        for (int i = 0; i < k; ++i) {
          const double api = A[p * k + i], aqi = A[q * k + i];
          A[p * k + i] = c * api - s * aqi;
          A[q * k + i] = s * api + c * aqi;
        }
        for (int i = 0; i < k; ++i) {
          const double vip = vectors[i * k + p], viq = vectors[i * k + q];
          vectors[i * k + p] = c * vip - s * viq;
          vectors[i * k + q] = s * vip + c * viq;
        }
      }
    }
  }
  values.resize(k);
  for (int i = 0; i < k; ++i) values[i] = A[i * k + i];
}

bool project_psd(std::vector<double>& a, int k, double rel_floor) {
  std::vector<double> vals, vecs;
  jacobi_eigen(a, k, vals, vecs);
  double vmax = 0.0;
  for (double v : vals) vmax = std::max(vmax, std::abs(v));
  const double floor_val = std::max(vmax * rel_floor, 1e-300);
  bool clipped = false;
  for (double& v : vals)
    if (v < floor_val) {
      v = floor_val;
      clipped = true;
    }
  if (!clipped) return false;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double sum = 0.0;
      for (int m = 0; m < k; ++m)
        sum += vecs[i * k + m] * vals[m] * vecs[j * k + m];
      a[i * k + j] = sum;
    }
  // re-symmetrize against rounding
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double v = 0.5 * (a[i * k + j] + a[j * k + i]);
      a[i * k + j] = v;
      a[j * k + i] = v;
    }
  return true;
}

}  // namespace mhmm::optim

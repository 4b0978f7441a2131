#include "mhmm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mhmm {
namespace {

// Implicit-shift QL for a symmetric tridiagonal matrix, carrying along the
// first row of the eigenvector matrix (classic Golub-Welsch companion).
// d: diagonal, e: subdiagonal (length n, e[n-1] unused), z: first-row seed.
void imtqlx(std::vector<double>& d, std::vector<double>& e,
            std::vector<double>& z) {
  const int n = static_cast<int>(d.size());
  if (n == 1) return;
  e[n - 1] = 0.0;
  const double prec = std::numeric_limits<double>::epsilon();
  const int max_iter = 40;

  for (int l = 0; l < n; ++l) {
    int iter = 0;
    while (true) {
      int m = l;
      for (; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= prec * dd) break;
      }
      if (m == l) break;
      if (++iter > max_iter)
        throw NumericalError("gh_rule: tridiagonal QL failed to converge");
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      for (int i = m - 1; i >= l; --i) {
        double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        f = z[i + 1];
        z[i + 1] = s * z[i] + c * f;
        z[i] = c * z[i] - s * f;
      }
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
}

}  // namespace

QuadratureRule gh_rule(int q) {
  if (q < 1 || q > 64)
    throw ValidationError("gh_rule: order must be in [1, 64], got " +
                          std::to_string(q));
  QuadratureRule rule;
  if (q == 1) {
    rule.nodes = {0.0};
    rule.log_weights = {0.0};
    return rule;
  }

  // Jacobi matrix of the probabilists' Hermite recurrence: zero diagonal,
  // subdiagonal sqrt(k). First moment of N(0,1) is 1, so weights are the
  // squared first eigenvector components.
  std::vector<double> d(q, 0.0), e(q, 0.0), z(q, 0.0);
  for (int k = 0; k < q - 1; ++k) e[k] = std::sqrt(static_cast<double>(k + 1));
  z[0] = 1.0;
  imtqlx(d, e, z);

  std::vector<int> idx(q);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return d[a] < d[b]; });

  std::vector<double> nodes(q), w(q);
  for (int k = 0; k < q; ++k) {
    nodes[k] = d[idx[k]];
    w[k] = z[idx[k]] * z[idx[k]];
  }

  // Symmetrize the +/- node pairs; the recurrence guarantees symmetry but the
  // QL sweep leaves ~1e-15 asymmetry.
  for (int k = 0; k < q / 2; ++k) {
    const int r = q - 1 - k;
    if (std::abs(nodes[k] + nodes[r]) > 1e-14 * std::max(1.0, std::abs(nodes[k])))
      throw NumericalError("gh_rule: node symmetry violated");
    const double m = 0.5 * (nodes[r] - nodes[k]);
    nodes[k] = -m;
    nodes[r] = m;
    const double wm = 0.5 * (w[k] + w[r]);
    w[k] = wm;
    w[r] = wm;
  }
  if (q % 2 == 1) nodes[q / 2] = 0.0;

  rule.nodes = std::move(nodes);
  rule.log_weights.resize(q);
  for (int k = 0; k < q; ++k) rule.log_weights[k] = std::log(w[k]);
  return rule;
}

void adapted_log_weights(const QuadratureRule& base, double center,
                         double scale, double lambda, double* out) {
  const double log_scale = std::log(scale);
  for (int k = 0; k < base.order(); ++k) {
    const double node = center + scale * base.nodes[k];
    // log w + log prior(node) - log standard kernel(base node) + log Jacobian
    out[k] = base.log_weights[k] +
             log_normal_pdf(node, 0.0, std::exp(lambda)) -
             log_normal_pdf(base.nodes[k], 0.0, 1.0) + log_scale;
  }
}

QuadratureRule adapt(const QuadratureRule& rule, double center, double scale,
                     double lambda) {
  if (!(scale > 0.0)) throw std::domain_error("adapt: scale must be positive");
  if (rule.adaptation)
    throw ValidationError("adapt: rule is already adapted");
  QuadratureRule out;
  const int q = rule.order();
  out.nodes.resize(q);
  out.log_weights.resize(q);
  for (int k = 0; k < q; ++k) out.nodes[k] = center + scale * rule.nodes[k];
  adapted_log_weights(rule, center, scale, lambda, out.log_weights.data());
  out.adaptation = Adaptation{center, scale, false};
  return out;
}

Adaptation find_adaptation(const std::function<double(double)>& log_f,
                           double lambda) {
  const double var = std::exp(lambda);
  const double sd = std::sqrt(var);

  const auto g = [&](double u) { return log_f(u) + log_normal_pdf(u, 0.0, var); };
  const auto dg = [&](double u) {
    const double h = 1e-5 * std::max(1.0, std::abs(u));
    return (g(u + h) - g(u - h)) / (2.0 * h);
  };

  // Bracket a sign change of g'; the prior score guarantees one exists for
  // any log_f whose growth is subexponential.
  double lo = -8.0 * sd, hi = 8.0 * sd;
  double dlo = dg(lo), dhi = dg(hi);
  int expand = 0;
  while (dlo < 0.0 && expand < 60) {
    hi = lo;
    dhi = dlo;
    lo *= 2.0;
    dlo = dg(lo);
    ++expand;
  }
  while (dhi > 0.0 && expand < 60) {
    lo = hi;
    dlo = dhi;
    hi *= 2.0;
    dhi = dg(hi);
    ++expand;
  }
  if (!(dlo >= 0.0 && dhi <= 0.0) || !std::isfinite(dlo) || !std::isfinite(dhi))
    return Adaptation{0.0, sd, true};

  // Safeguarded Newton on g', three evaluations per step (the same trio
  // yields both finite-difference derivatives), bisection as fallback.
  double u = 0.5 * (lo + hi);
  for (int it = 0; it < 60; ++it) {
    const double h = 1e-5 * std::max(1.0, std::abs(u));
    const double gm = g(u - h), g0 = g(u), gp = g(u + h);
    const double d1 = (gp - gm) / (2.0 * h);
    const double d2 = (gp - 2.0 * g0 + gm) / (h * h);
    if (std::isfinite(d1)) {
      if (d1 > 0.0)
        lo = u;
      else
        hi = u;
    }
    double next;
    if (std::isfinite(d1) && std::isfinite(d2) && d2 < 0.0) {
      next = u - d1 / d2;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    } else {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - u) <= 1e-10 * std::max(1.0, std::abs(u))) {
      u = next;
      break;
    }
    u = next;
    if (hi - lo <= 1e-11 * std::max(1.0, std::abs(u))) break;
  }

  const double hc = 1e-2 * std::max(1.0, std::abs(u));
  const double curv = (g(u + hc) - 2.0 * g(u) + g(u - hc)) / (hc * hc);
  if (!std::isfinite(curv) || curv >= 0.0) return Adaptation{u, sd, true};
  return Adaptation{u, 1.0 / std::sqrt(-curv), false};
}

}  // namespace mhmm

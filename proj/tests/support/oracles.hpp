#pragma once

// Independent reference computations. Nothing here calls the code under test
// for the quantity being checked.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using LD = long double;

/// (1/lambda) log(mean exp(lambda v)) in extended precision, no saturation.
inline double softmin(const Eigen::VectorXd& v, double lambda) {
  if (lambda == 0.0) {
    LD s = 0;
    for (double x : v) s += x;
    return static_cast<double>(s / v.size());
  }
  if (std::isinf(lambda)) return lambda > 0 ? v.maxCoeff() : v.minCoeff();
  const LD m = lambda > 0 ? v.maxCoeff() : v.minCoeff();
  LD s = 0;
  for (double x : v) s += std::exp(static_cast<LD>(lambda) * (x - m));
  return static_cast<double>(m + std::log(s / v.size()) / static_cast<LD>(lambda));
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel * (1.0 + std::abs(x[i]));
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (a[i] - b[i]);
  }
  return g;
}

inline double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

/// Max of J over the square [lo, hi]^2 sampled with the given step.
inline double grid_max_2d(const std::function<double(double, double)>& J, double lo, double hi,
                          double step, double* ax = nullptr, double* ay = nullptr) {
  double best = -std::numeric_limits<double>::infinity();
  const long k = std::lround((hi - lo) / step);
  for (long i = 0; i <= k; ++i)
    for (long j = 0; j <= k; ++j) {
      const double x = lo + i * step, y = lo + j * step;
      const double v = J(x, y);
      if (v > best) {
        best = v;
        if (ax) *ax = x;
        if (ay) *ay = y;
      }
    }
  return best;
}

/// Cross-entropy of a dense feed-forward net whose layers are stored as
/// row-major W (out x in) followed by b, evaluated in extended precision.
inline double cross_entropy(const std::vector<int>& sizes, bool tanh_act,
                            const Eigen::VectorXd& theta, const Eigen::VectorXd& x, int y) {
  std::vector<LD> a(x.data(), x.data() + x.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes[l]), out = static_cast<std::size_t>(sizes[l + 1]);
    std::vector<LD> z(out, 0);
    for (std::size_t r = 0; r < out; ++r) {
      LD s = 0;
      for (std::size_t c = 0; c < in; ++c) s += static_cast<LD>(theta[static_cast<Eigen::Index>(off + r * in + c)]) * a[c];
      z[r] = s + static_cast<LD>(theta[static_cast<Eigen::Index>(off + out * in + r)]);
    }
    off += out * in + out;
    if (l + 2 < sizes.size()) {
      for (auto& v : z) v = tanh_act ? std::tanh(v) : (v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)));
    }
    a = std::move(z);
  }
  LD m = *std::max_element(a.begin(), a.end());
  LD s = 0;
  for (LD v : a) s += std::exp(v - m);
  return static_cast<double>(m + std::log(s) - a[static_cast<std::size_t>(y)]);
}

/// Logistic-regression gradient against a soft target, written out directly.
inline Eigen::VectorXd logistic_soft_gradient(const Eigen::VectorXd& th, const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& t) {
  const auto C = t.size(), d = x.size();
  Eigen::VectorXd z(C);
  for (Eigen::Index c = 0; c < C; ++c) {
    z[c] = th[C * d + c];
    for (Eigen::Index j = 0; j < d; ++j) z[c] += th[c * d + j] * x[j];
  }
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  p /= p.sum();
  const Eigen::VectorXd delta = p * t.sum() - t;
  Eigen::VectorXd g(C * d + C);
  for (Eigen::Index c = 0; c < C; ++c) {
    for (Eigen::Index j = 0; j < d; ++j) g[c * d + j] = delta[c] * x[j];
    g[C * d + c] = delta[c];
  }
  return g;
}

/// Minimum transport cost by enumerating basic feasible solutions: every set
/// of m + n - 1 cells whose marginal system has a unique nonnegative solution.
inline double transport_by_vertices(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                    const Eigen::MatrixXd& C) {
  const int m = static_cast<int>(a.size()), n = static_cast<int>(b.size());
  const int cells = m * n, pick = m + n - 1;
  Eigen::VectorXd rhs(m + n);
  rhs << a, b;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(pick));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == pick) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + n, pick);
      for (int k = 0; k < pick; ++k) {
        const int c = idx[static_cast<std::size_t>(k)];
        A(c / n, k) = 1.0;
        A(m + c % n, k) = 1.0;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      if (lu.rank() < pick) return;
      const Eigen::VectorXd x = A.colPivHouseholderQr().solve(rhs);
      if ((A * x - rhs).norm() > 1e-10 || x.minCoeff() < -1e-12) return;
      double cost = 0;
      for (int k = 0; k < pick; ++k) {
        const int c = idx[static_cast<std::size_t>(k)];
        cost += std::max(0.0, x[k]) * C(c / n, c % n);
      }
      best = std::min(best, cost);
      return;
    }
    for (int c = start; c <= cells - (pick - depth); ++c) {
      idx[static_cast<std::size_t>(depth)] = c;
      rec(c + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

/// Direct reading of the minimum supervision ratio for a finite class:
/// a subset is admissible at lambda when every member has rho_lambda >= 0.
struct MsrInput {
  int nx, ny;
  Eigen::VectorXd p0;
  Eigen::MatrixXd phi;
};

inline double rho(const MsrInput& in, int f, double lambda) {
  LD soft = 0, plain = 0;
  for (int x = 0; x < in.nx; ++x) {
    Eigen::VectorXd row(in.ny);
    LD px = 0;
    for (int y = 0; y < in.ny; ++y) {
      row[y] = in.phi(f, x * in.ny + y);
      px += in.p0[x * in.ny + y];
      plain += static_cast<LD>(in.p0[x * in.ny + y]) * row[y];
    }
    soft += px * softmin(row, lambda);
  }
  return static_cast<double>(soft - plain);
}

inline double msr(const MsrInput& in, double lambda, double zeta) {
  const int F = static_cast<int>(in.phi.rows());
  std::vector<double> E(static_cast<std::size_t>(F)), R(static_cast<std::size_t>(F));
  int star = 0;
  for (int f = 0; f < F; ++f) {
    E[static_cast<std::size_t>(f)] = in.phi.row(f).dot(in.p0);
    R[static_cast<std::size_t>(f)] = rho(in, f, lambda);
    if (E[static_cast<std::size_t>(f)] < E[static_cast<std::size_t>(star)]) star = f;
  }
  const double inf = std::numeric_limits<double>::infinity();
  double best = inf;
  for (unsigned psi = 0; psi < (1u << F); ++psi) {
    bool admissible = true;
    for (int f = 0; f < F; ++f)
      if ((psi >> f & 1u) && R[static_cast<std::size_t>(f)] < -1e-12) admissible = false;
    if (!admissible) continue;
    double gap = inf, gam = inf;
    for (int f = 0; f < F; ++f) {
      if (psi >> f & 1u) continue;
      gap = std::min(gap, E[static_cast<std::size_t>(f)] - E[static_cast<std::size_t>(star)]);
      gam = std::min(gam, R[static_cast<std::size_t>(f)] - R[static_cast<std::size_t>(star)]);
    }
    if (psi == (1u << F) - 1) gam = 0.0;
    const double den = std::max(0.0, -gam);
    double ratio;
    if (den > 0) {
      ratio = (gap - zeta) / den;
    } else {
      ratio = gap - zeta >= 0 ? inf : -inf;
    }
    const double arg = 1.0 - ratio;
    const double h = std::min(1.0, std::max(0.0, arg));
    best = std::min(best, h);
  }
  return best == inf ? 1.0 : best;
}

}  // namespace oracle

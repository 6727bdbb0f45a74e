#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ssdrl/error.hpp"

namespace ssdrl {

/// Temperature of the softmin. Finite values, -inf and +inf are valid; NaN
/// is rejected.
class Lambda {
 public:
  constexpr Lambda() = default;
  explicit Lambda(double v) : v_(v) {
    detail::require(!std::isnan(v), ErrorKind::InvalidInput, "lambda is NaN");
  }

  static Lambda neg_inf() { return Lambda(-std::numeric_limits<double>::infinity()); }
  static Lambda pos_inf() { return Lambda(std::numeric_limits<double>::infinity()); }

  double value() const { return v_; }
  bool is_finite() const { return std::isfinite(v_); }
  bool is_neg_inf() const { return std::isinf(v_) && v_ < 0; }
  bool is_pos_inf() const { return std::isinf(v_) && v_ > 0; }

  friend bool operator==(Lambda a, Lambda b) { return a.v_ == b.v_; }

 private:
  double v_ = 0.0;
};

/// Point of the probability simplex. Entries are >= 0 and sum to 1 within 1e-12.
class ProbVector {
 public:
  ProbVector() = default;
  explicit ProbVector(Eigen::VectorXd w) : w_(std::move(w)) {
    detail::require(w_.size() > 0, ErrorKind::InvalidInput, "empty probability vector");
    double s = 0.0;
    for (Eigen::Index i = 0; i < w_.size(); ++i) {
      detail::require(std::isfinite(w_[i]) && w_[i] >= 0.0, ErrorKind::InvalidInput,
                      "probability entry negative or non-finite");
      s += w_[i];
    }
    detail::require(std::abs(s - 1.0) <= 1e-12, ErrorKind::InvalidInput,
                    "probability vector does not sum to 1");
  }

  const Eigen::VectorXd& weights() const { return w_; }
  double operator[](Eigen::Index i) const { return w_[i]; }
  Eigen::Index size() const { return w_.size(); }

 private:
  Eigen::VectorXd w_;
};

namespace detail {

inline void check_values(const Eigen::VectorXd& v) {
  require(v.size() > 0, ErrorKind::InvalidInput, "softmin of an empty vector");
  for (Eigen::Index i = 0; i < v.size(); ++i)
    require(std::isfinite(v[i]), ErrorKind::InvalidInput, "softmin input not finite");
}

// Beyond this value of |lambda| * range the smooth value is replaced by the
// exact extremum.
inline constexpr double kSoftminSaturation = 700.0;

inline bool saturated(double lam, double range) {
  return std::isinf(lam) || std::abs(lam) * range > kSoftminSaturation;
}

}  // namespace detail

/// (1/lambda) log((1/d) sum_i exp(lambda v_i)); mean at 0, min/max at -inf/+inf.
inline double softmin(const Eigen::VectorXd& v, Lambda lambda) {
  detail::check_values(v);
  const double lam = lambda.value();
  const auto n = static_cast<double>(v.size());
  if (lam == 0.0) return v.sum() / n;
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  if (lo == hi) return lo;
  if (detail::saturated(lam, hi - lo)) return lam > 0 ? hi : lo;
  // Shift so every exponent is <= 0, then work with expm1/log1p so tiny
  // temperatures keep full precision.
  const double c = lam > 0 ? hi : lo;
  double t = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) t += std::expm1(lam * (v[i] - c));
  t /= n;
  const double out = c + std::log1p(t) / lam;
  return std::clamp(out, lo, hi);
}

/// Normalised exp(lambda v_i); the gradient of softmin with respect to v.
inline ProbVector softmin_weights(const Eigen::VectorXd& v, Lambda lambda) {
  detail::check_values(v);
  const double lam = lambda.value();
  const Eigen::Index d = v.size();
  Eigen::VectorXd w(d);
  if (lam == 0.0) {
    w.setConstant(1.0 / static_cast<double>(d));
    return ProbVector(std::move(w));
  }
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  if (detail::saturated(lam, hi - lo)) {
    const double target = lam > 0 ? hi : lo;
    int ties = 0;
    for (Eigen::Index i = 0; i < d; ++i) ties += (v[i] == target);
    for (Eigen::Index i = 0; i < d; ++i)
      w[i] = v[i] == target ? 1.0 / static_cast<double>(ties) : 0.0;
    return ProbVector(std::move(w));
  }
  const double c = lam > 0 ? hi : lo;
  for (Eigen::Index i = 0; i < d; ++i) w[i] = std::exp(lam * (v[i] - c));
  w /= w.sum();
  return ProbVector(std::move(w));
}

/// Shannon entropy in nats with 0 log 0 = 0.
inline double entropy(const ProbVector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return std::max(h, 0.0);
}

/// Brute-force extremum of q.b + (1/lambda) H(q) - (1/lambda) log d over a
/// simplex grid with spacing grid_step. For lambda < 0 the objective is convex
/// in q and the infimum is taken; for lambda > 0 it is concave and the
/// supremum is taken. Both equal softmin(b, lambda) in the continuum.
inline double entropy_regularized_min_oracle(const Eigen::VectorXd& b, Lambda lambda,
                                             double grid_step) {
  detail::check_values(b);
  detail::require(lambda.is_finite() && lambda.value() != 0.0, ErrorKind::InvalidInput,
                  "oracle needs a finite nonzero lambda");
  detail::require(grid_step > 0.0 && grid_step <= 0.1, ErrorKind::InvalidInput,
                  "grid_step must lie in (0, 0.1]");
  detail::require(b.size() <= 4, ErrorKind::InstanceTooLarge, "oracle supports d <= 4");

  using LD = long double;
  const int d = static_cast<int>(b.size());
  const long m = std::lround(1.0 / grid_step);
  const LD lam = lambda.value();
  const LD logd = std::log(static_cast<LD>(d));
  const bool minimise = lam < 0;
  LD best = minimise ? std::numeric_limits<LD>::infinity()
                     : -std::numeric_limits<LD>::infinity();

  std::vector<long> k(static_cast<std::size_t>(d), 0);
  // Enumerate compositions k_0 + ... + k_{d-1} = m.
  auto visit = [&]() {
    LD lin = 0, h = 0;
    for (int i = 0; i < d; ++i) {
      const LD q = static_cast<LD>(k[static_cast<std::size_t>(i)]) / static_cast<LD>(m);
      lin += q * static_cast<LD>(b[i]);
      if (q > 0) h -= q * std::log(q);
    }
    const LD f = lin + (h - logd) / lam;
    best = minimise ? std::min(best, f) : std::max(best, f);
  };
  auto rec = [&](auto&& self, int i, long left) -> void {
    if (i == d - 1) {
      k[static_cast<std::size_t>(i)] = left;
      visit();
      return;
    }
    for (long j = 0; j <= left; ++j) {
      k[static_cast<std::size_t>(i)] = j;
      self(self, i + 1, left - j);
    }
  };
  rec(rec, 0, m);
  return static_cast<double>(best);
}

}  // namespace ssdrl

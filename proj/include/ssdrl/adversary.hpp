#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ssdrl/error.hpp"
#include "ssdrl/models.hpp"

namespace ssdrl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Dual penalty gamma and the ascent schedule r_t = (kappa / gamma) / (t + 1).
/// gamma = +inf is the no-attack sentinel.
struct AttackConfig {
  double gamma = kInf;
  double kappa = 1.0;
  int steps = 5;
  /// Stop once ||grad J||^2 / (2 gamma) <= delta, which bounds the remaining
  /// suboptimality whenever J is gamma-strongly concave. 0 disables it.
  double delta = 0.0;

  bool no_attack() const { return std::isinf(gamma) && gamma > 0; }

  void validate() const {
    detail::require(gamma > 0.0 && !std::isnan(gamma), ErrorKind::InvalidInput,
                    "gamma must be > 0");
    detail::require(kappa > 0.0 && std::isfinite(kappa), ErrorKind::InvalidInput,
                    "kappa must be > 0");
    detail::require(steps >= 1 && steps <= 10000, ErrorKind::InvalidInput,
                    "steps must lie in [1, 10000]");
    detail::require(delta >= 0.0, ErrorKind::InvalidInput, "delta must be >= 0");
  }
};

struct AttackResult {
  Example z_star;
  double objective = 0.0;
  int iterations = 0;
  double final_ascent_gradnorm = 0.0;
  /// Best objective after each step, starting with the anchor value.
  std::vector<double> best_history;
};

namespace detail {

struct Ascent {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  double gradnorm = 0.0;
  std::vector<double> history;
};

template <DifferentiableLoss M>
double ascent_objective(const M& m, const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& x0, int y, double gamma) {
  return m.loss(theta, x, y) - gamma * (x - x0).squaredNorm();
}

template <DifferentiableLoss M>
Eigen::VectorXd ascent_gradient(const M& m, const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& x, const Eigen::VectorXd& x0, int y,
                                double gamma) {
  return m.grad_features(theta, x, y) - 2.0 * gamma * (x - x0);
}

/// Core of the inner maximisation on raw vectors. Returns the best iterate.
template <DifferentiableLoss M>
Ascent ascend(const M& m, const Eigen::VectorXd& theta, const Eigen::VectorXd& x0, int y,
              const AttackConfig& cfg, bool keep_history = false) {
  Ascent out;
  out.x = x0;
  out.objective = m.loss(theta, x0, y);
  if (keep_history) out.history.push_back(out.objective);
  if (cfg.no_attack()) return out;

  Eigen::VectorXd x = x0;
  Eigen::VectorXd g = ascent_gradient(m, theta, x, x0, y, cfg.gamma);
  Eigen::VectorXd best_g = g;
  for (int t = 0; t < cfg.steps; ++t) {
    if (cfg.delta > 0.0 && g.squaredNorm() / (2.0 * cfg.gamma) <= cfg.delta) break;
    const double r = (cfg.kappa / cfg.gamma) / static_cast<double>(t + 1);
    x += r * g;
    require(x.allFinite(), ErrorKind::DivergedAttack, "ascent iterate not finite");
    const double j = ascent_objective(m, theta, x, x0, y, cfg.gamma);
    require(std::isfinite(j), ErrorKind::DivergedAttack, "ascent objective not finite");
    g = ascent_gradient(m, theta, x, x0, y, cfg.gamma);
    out.iterations = t + 1;
    if (j > out.objective) {
      out.objective = j;
      out.x = x;
      best_g = g;
    }
    if (keep_history) out.history.push_back(out.objective);
  }
  out.gradnorm = best_g.norm();
  return out;
}

}  // namespace detail

/// Approximate maximiser of l((X', y); theta) - gamma ||X' - X||^2 over X'.
/// The label is never changed since a label flip has infinite cost.
template <DifferentiableLoss M>
AttackResult solve_inner_max(const M& model, const Eigen::VectorXd& theta,
                             const Example& anchor, const AttackConfig& cfg) {
  cfg.validate();
  detail::require(anchor.label.has_value(), ErrorKind::MissingLabel,
                  "inner maximisation needs a labeled anchor");
  auto a = detail::ascend(model, theta, anchor.features, *anchor.label, cfg, true);
  AttackResult r;
  r.z_star = Example{std::move(a.x), anchor.label};
  r.objective = a.objective;
  r.iterations = a.iterations;
  r.final_ascent_gradnorm = a.gradnorm;
  r.best_history = std::move(a.history);
  return r;
}

/// Adversarial loss phi_gamma(z; theta).
template <DifferentiableLoss M>
double phi_gamma(const M& model, const Eigen::VectorXd& theta, const Example& anchor,
                 const AttackConfig& cfg) {
  cfg.validate();
  detail::require(anchor.label.has_value(), ErrorKind::MissingLabel,
                  "adversarial loss needs a labeled anchor");
  return detail::ascend(model, theta, anchor.features, *anchor.label, cfg).objective;
}

struct ConcavityCheck {
  bool pass = false;
  /// gamma - estimated L_zz, the modulus being tested.
  double margin = 0.0;
  /// Smallest modulus implied by any probe, 8 (J(mid) - avg) / ||z1 - z2||^2.
  double observed_modulus = kInf;
  /// Smallest slack of the strong-concavity inequality over the probes.
  double worst_slack = kInf;
};

/// Probes the midpoint form of strong concavity,
/// J((z1 + z2) / 2) >= (J(z1) + J(z2)) / 2 + (m / 8) ||z1 - z2||^2,
/// with m = gamma - L_zz estimated from gradient differences near the anchor.
template <DifferentiableLoss M>
ConcavityCheck check_strong_concavity(const M& model, const Eigen::VectorXd& theta,
                                      const Example& anchor, const AttackConfig& cfg,
                                      int probes, std::uint64_t seed = 0,
                                      double radius = 1.0) {
  detail::require(probes >= 10, ErrorKind::InvalidInput, "need at least 10 probes");
  detail::require(anchor.label.has_value(), ErrorKind::MissingLabel, "anchor needs a label");
  cfg.validate();
  ConcavityCheck out;
  if (cfg.no_attack()) {
    out.pass = true;
    out.margin = kInf;
    return out;
  }
  const int y = *anchor.label;
  const Eigen::VectorXd& x0 = anchor.features;
  std::mt19937_64 rng(seed);

  double lzz = 0.0;
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  for (int i = 0; i < probes; ++i) {
    Eigen::VectorXd a = detail::sample_ball(rng, x0, radius);
    Eigen::VectorXd b = detail::sample_ball(rng, x0, radius);
    lzz = std::max(lzz, detail::ratio(model.grad_features(theta, a, y) -
                                          model.grad_features(theta, b, y),
                                      a - b));
    pairs.emplace_back(std::move(a), std::move(b));
  }
  out.margin = cfg.gamma - lzz;

  bool ok = out.margin > 0.0;
  for (const auto& [a, b] : pairs) {
    const double d2 = (a - b).squaredNorm();
    if (d2 == 0.0) continue;
    const double ja = detail::ascent_objective(model, theta, a, x0, y, cfg.gamma);
    const double jb = detail::ascent_objective(model, theta, b, x0, y, cfg.gamma);
    const double jm = detail::ascent_objective(model, theta, 0.5 * (a + b), x0, y, cfg.gamma);
    const double gap = jm - 0.5 * (ja + jb);
    const double slack = gap - out.margin / 8.0 * d2;
    const double tol = 1e-9 * (1.0 + std::abs(ja) + std::abs(jb));
    out.observed_modulus = std::min(out.observed_modulus, 8.0 * gap / d2);
    out.worst_slack = std::min(out.worst_slack, slack);
    if (slack < -tol) ok = false;
  }
  out.pass = ok;
  return out;
}

/// T steps of X <- Proj_{X0, eps}(X + xi * g / ||g||) with xi = eps / log T.
template <DifferentiableLoss M>
Example pgm_attack(const M& model, const Eigen::VectorXd& theta, const Example& z,
                   double epsilon, int T) {
  detail::require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorKind::InvalidInput,
                  "epsilon must be finite and >= 0");
  detail::require(T >= 2, ErrorKind::InvalidInput, "PGM needs T >= 2");
  detail::require(z.label.has_value(), ErrorKind::MissingLabel, "PGM needs a labeled example");
  if (epsilon == 0.0) return z;
  const int y = *z.label;
  const Eigen::VectorXd& x0 = z.features;
  const double xi = epsilon / std::log(static_cast<double>(T));
  Eigen::VectorXd x = x0;
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd g = model.grad_features(theta, x, y);
    const double gn = g.norm();
    if (gn > 0.0 && std::isfinite(gn)) x += (xi / gn) * g;
    const Eigen::VectorXd d = x - x0;
    const double dn = d.norm();
    if (dn > epsilon) {
      // The rescale can land an ulp outside; back off with a growing margin.
      double margin = 0.0;
      do {
        x = x0 + d * (epsilon / dn * (1.0 - margin));
        margin = margin == 0.0 ? 1e-16 : 2.0 * margin;
      } while ((x - x0).norm() > epsilon);
    }
  }
  return Example{std::move(x), z.label};
}

}  // namespace ssdrl

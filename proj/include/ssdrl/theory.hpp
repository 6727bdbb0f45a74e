#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ssdrl/error.hpp"
#include "ssdrl/lp.hpp"
#include "ssdrl/softmin.hpp"

namespace ssdrl {

/// Enumerated sample space Z = X x Y with a distribution, a finite function
/// class and a ground cost. Point (x, y) has index x * num_y + y.
struct FiniteInstance {
  int num_x = 0;
  int num_y = 0;
  Eigen::VectorXd p0;
  Eigen::MatrixXd phi;   // one row per function
  Eigen::MatrixXd cost;  // may contain +inf

  int num_points() const { return num_x * num_y; }
  int point(int x, int y) const { return x * num_y + y; }
  int num_functions() const { return static_cast<int>(phi.rows()); }

  Eigen::VectorXd marginal_x() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(num_x);
    for (int x = 0; x < num_x; ++x)
      for (int y = 0; y < num_y; ++y) m[x] += p0[point(x, y)];
    return m;
  }

  void validate() const {
    using detail::require;
    require(num_x >= 1 && num_y >= 1, ErrorKind::InvalidInput, "empty instance");
    require(num_x <= 12 && num_y <= 4, ErrorKind::InstanceTooLarge,
            "instance limited to |X| <= 12 and |Y| <= 4");
    require(phi.rows() <= 15, ErrorKind::InstanceTooLarge, "at most 15 functions");
    const int N = num_points();
    require(p0.size() == N, ErrorKind::ShapeError, "p0 size must be |X||Y|");
    require(phi.rows() == 0 || phi.cols() == N, ErrorKind::ShapeError,
            "phi must have |X||Y| columns");
    require(cost.rows() == N && cost.cols() == N, ErrorKind::ShapeError,
            "cost must be |Z| x |Z|");
    require(p0.allFinite() && (p0.array() >= 0).all(), ErrorKind::InvalidInput,
            "p0 entries must be finite and >= 0");
    require(std::abs(p0.sum() - 1.0) <= 1e-12, ErrorKind::InvalidInput, "p0 must sum to 1");
    require(phi.allFinite(), ErrorKind::InvalidInput, "phi must be finite");
    for (int i = 0; i < N; ++i) {
      require(cost(i, i) == 0.0, ErrorKind::InvalidInput, "cost diagonal must be 0");
      for (int j = 0; j < N; ++j)
        require(!std::isnan(cost(i, j)) && cost(i, j) >= 0.0, ErrorKind::InvalidInput,
                "costs must be >= 0");
    }
  }
};

inline void to_json(nlohmann::json& j, const FiniteInstance& inst) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  j = nlohmann::json::object();
  j["num_x"] = inst.num_x;
  j["num_y"] = inst.num_y;
  j["points"] = nlohmann::json::array();
  for (int x = 0; x < inst.num_x; ++x)
    for (int y = 0; y < inst.num_y; ++y) j["points"].push_back({x, y});
  j["p0"] = std::vector<double>(inst.p0.data(), inst.p0.data() + inst.p0.size());
  j["phi"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < inst.phi.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < inst.phi.cols(); ++c) row.push_back(inst.phi(r, c));
    j["phi"].push_back(row);
  }
  j["cost"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < inst.cost.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < inst.cost.cols(); ++c) row.push_back(num(inst.cost(r, c)));
    j["cost"].push_back(row);
  }
}

inline void from_json(const nlohmann::json& j, FiniteInstance& inst) {
  auto num = [](const nlohmann::json& v) {
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      throw Error(ErrorKind::FormatError, "bad number '" + s + "'");
    }
    return v.get<double>();
  };
  auto matrix = [&](const nlohmann::json& rows, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != cols)
        throw Error(ErrorKind::ShapeError, "ragged matrix in instance");
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = num(rows[r][c]);
    }
    return m;
  };
  try {
    inst.num_x = j.at("num_x").get<int>();
    inst.num_y = j.at("num_y").get<int>();
    const auto N = static_cast<Eigen::Index>(inst.num_x) * inst.num_y;
    const auto& p = j.at("p0");
    inst.p0.resize(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) inst.p0[static_cast<Eigen::Index>(i)] = num(p[i]);
    inst.phi = matrix(j.at("phi"), N);
    inst.cost = matrix(j.at("cost"), N);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, e.what());
  }
}

/// Random instance: uniform-then-normalised p0, phi uniform on [0, 1], and
/// cost (s_x - s_x')^2 between random feature positions when the labels
/// agree, +inf otherwise.
inline FiniteInstance random_instance(std::uint64_t seed, int num_x, int num_y,
                                      int num_functions) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FiniteInstance inst;
  inst.num_x = num_x;
  inst.num_y = num_y;
  const int N = num_x * num_y;
  inst.p0.resize(N);
  for (int i = 0; i < N; ++i) inst.p0[i] = 0.05 + u(rng);
  inst.p0 /= inst.p0.sum();
  inst.phi.resize(num_functions, N);
  for (int f = 0; f < num_functions; ++f)
    for (int i = 0; i < N; ++i) inst.phi(f, i) = u(rng);
  std::vector<double> pos(static_cast<std::size_t>(num_x));
  for (auto& s : pos) s = u(rng);
  inst.cost.resize(N, N);
  for (int x = 0; x < num_x; ++x)
    for (int y = 0; y < num_y; ++y)
      for (int x2 = 0; x2 < num_x; ++x2)
        for (int y2 = 0; y2 < num_y; ++y2) {
          const double d = pos[static_cast<std::size_t>(x)] - pos[static_cast<std::size_t>(x2)];
          inst.cost(inst.point(x, y), inst.point(x2, y2)) =
              y == y2 ? (x == x2 ? 0.0 : d * d) : std::numeric_limits<double>::infinity();
        }
  inst.validate();
  return inst;
}

namespace detail {

inline void check_function(const FiniteInstance& inst, int f) {
  require(f >= 0 && f < inst.num_functions(), ErrorKind::InvalidInput,
          "function index out of range");
}

}  // namespace detail

/// E_x[softmin_y phi(x, y)] - E_z[phi(z)], summed as sum_z p(z) (s_x - phi(z))
/// so that the lambda = +inf value is a sum of nonnegative terms.
inline double rho_lambda(const FiniteInstance& inst, int f, Lambda lambda) {
  detail::check_function(inst, f);
  double total = 0.0;
  Eigen::VectorXd row(inst.num_y);
  for (int x = 0; x < inst.num_x; ++x) {
    for (int y = 0; y < inst.num_y; ++y) row[y] = inst.phi(f, inst.point(x, y));
    const double s = softmin(row, lambda);
    for (int y = 0; y < inst.num_y; ++y) total += inst.p0[inst.point(x, y)] * (s - row[y]);
  }
  return total;
}

inline double expected_phi(const FiniteInstance& inst, int f) {
  detail::check_function(inst, f);
  return inst.phi.row(f).dot(inst.p0);
}

/// Index of the function with the smallest expectation (lowest index on ties).
inline int best_function(const FiniteInstance& inst) {
  detail::require(inst.num_functions() > 0, ErrorKind::InvalidInput, "no functions");
  int best = 0;
  double v = expected_phi(inst, 0);
  for (int f = 1; f < inst.num_functions(); ++f) {
    const double e = expected_phi(inst, f);
    if (e < v) {
      v = e;
      best = f;
    }
  }
  return best;
}

inline constexpr double kRhoTolerance = 1e-12;
inline constexpr double kLambdaBracket = 1e6;
inline constexpr double kLambdaTolerance = 1e-8;

/// Smallest lambda with rho_lambda(phi_f) >= 0, by bisection on the
/// monotone map lambda -> rho_lambda.
inline double lambda_threshold(const FiniteInstance& inst, int f) {
  auto ok = [&](double l) { return rho_lambda(inst, f, Lambda(l)) >= -kRhoTolerance; };
  const double inf = std::numeric_limits<double>::infinity();
  if (ok(-inf)) return -inf;
  if (!ok(inf)) return inf;
  double lo = -kLambdaBracket, hi = kLambdaBracket;
  if (ok(lo)) return lo;
  if (!ok(hi)) return inf;
  while (hi - lo > kLambdaTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// Subsets of the function class are bitmasks over function indices.
using FunctionSubset = std::uint32_t;

struct GapGammaLambda {
  double GAP = 0.0;
  std::function<double(Lambda)> Gamma;
  double Lambda_ = 0.0;
};

/// GAP(psi), Gamma(psi; .) and Lambda(psi). The empty subset has
/// Lambda = -inf; the full class has GAP = inf and Gamma = 0.
inline GapGammaLambda gap_gamma_lambda(const FiniteInstance& inst, FunctionSubset psi) {
  const int F = inst.num_functions();
  detail::require(F > 0 && F <= 15, ErrorKind::InstanceTooLarge, "need 1..15 functions");
  detail::require(psi < (FunctionSubset{1} << F), ErrorKind::InvalidInput,
                  "subset mentions a missing function");
  const int star = best_function(inst);
  const double e_star = expected_phi(inst, star);
  GapGammaLambda out;
  out.GAP = std::numeric_limits<double>::infinity();
  out.Lambda_ = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < F; ++f) {
    if (psi >> f & 1u) {
      out.Lambda_ = std::max(out.Lambda_, lambda_threshold(inst, f));
    } else {
      out.GAP = std::min(out.GAP, expected_phi(inst, f) - e_star);
    }
  }
  out.Gamma = [&inst, psi, F, star](Lambda lam) {
    if (psi == (FunctionSubset{1} << F) - 1) return 0.0;
    const double r_star = rho_lambda(inst, star, lam);
    double g = std::numeric_limits<double>::infinity();
    for (int f = 0; f < F; ++f)
      if (!(psi >> f & 1u)) g = std::min(g, rho_lambda(inst, f, lam) - r_star);
    return g;
  };
  return out;
}

namespace detail {

inline double ramp(double v) { return v > 0.0 ? v : 0.0; }
inline double clip01(double v) { return std::min(1.0, ramp(v)); }

/// h(1 - (gap - zeta) / u(-Gamma)) with the limits used when u(-Gamma) = 0.
inline double msr_term(double gap, double gamma, double zeta) {
  const double num = gap - zeta;
  const double den = ramp(-gamma);
  if (den == 0.0) return num >= 0.0 ? 0.0 : 1.0;
  if (std::isinf(num)) return num > 0 ? 0.0 : 1.0;
  return clip01(1.0 - num / den);
}

}  // namespace detail

/// Minimum supervision ratio by enumeration of all 2^|Phi| subsets. Lambda of
/// a subset is the max of the single-function thresholds, since each
/// feasibility set is an up-ray in lambda.
inline double msr(const FiniteInstance& inst, Lambda lambda, double zeta) {
  const int F = inst.num_functions();
  detail::require(F <= 15, ErrorKind::InstanceTooLarge, "MSR enumerates at most 15 functions");
  detail::require(F >= 1, ErrorKind::InvalidInput, "no functions");
  detail::require(zeta >= 0.0, ErrorKind::InvalidInput, "margin must be >= 0");
  const int star = best_function(inst);
  const double e_star = expected_phi(inst, star);
  const double r_star = rho_lambda(inst, star, lambda);
  std::vector<double> thr(static_cast<std::size_t>(F)), gap(static_cast<std::size_t>(F)),
      gam(static_cast<std::size_t>(F));
  for (int f = 0; f < F; ++f) {
    const auto sf = static_cast<std::size_t>(f);
    thr[sf] = lambda_threshold(inst, f);
    gap[sf] = expected_phi(inst, f) - e_star;
    gam[sf] = rho_lambda(inst, f, lambda) - r_star;
  }
  const FunctionSubset full = (FunctionSubset{1} << F) - 1;
  double best = 1.0;
  bool any = false;
  for (FunctionSubset psi = 0; psi <= full; ++psi) {
    double lam = -std::numeric_limits<double>::infinity();
    double g = std::numeric_limits<double>::infinity();
    double G = std::numeric_limits<double>::infinity();
    for (int f = 0; f < F; ++f) {
      const auto sf = static_cast<std::size_t>(f);
      if (psi >> f & 1u) {
        lam = std::max(lam, thr[sf]);
      } else {
        g = std::min(g, gap[sf]);
        G = std::min(G, gam[sf]);
      }
    }
    if (psi == full) G = 0.0;
    if (!(lam <= lambda.value())) continue;
    any = true;
    best = std::min(best, detail::msr_term(g, G, zeta));
  }
  return any ? best : 1.0;
}

/// Wasserstein distance between two distributions on the same finite point
/// set, solved exactly as a transportation problem over their supports.
inline double discrete_wasserstein(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                                   const Eigen::MatrixXd& cost) {
  const Eigen::Index N = p.size();
  detail::require(q.size() == N && cost.rows() == N && cost.cols() == N,
                  ErrorKind::ShapeError, "shape mismatch");
  detail::require(p.allFinite() && q.allFinite() && (p.array() >= 0).all() &&
                      (q.array() >= 0).all(),
                  ErrorKind::InvalidInput, "probabilities must be finite and >= 0");
  detail::require(std::abs(p.sum() - 1.0) <= 1e-9 && std::abs(q.sum() - 1.0) <= 1e-9,
                  ErrorKind::InvalidInput, "marginals must sum to 1");
  std::vector<Eigen::Index> sp, sq;
  for (Eigen::Index i = 0; i < N; ++i) {
    if (p[i] > 0) sp.push_back(i);
    if (q[i] > 0) sq.push_back(i);
  }
  detail::require(sp.size() <= 12 && sq.size() <= 12, ErrorKind::InstanceTooLarge,
                  "supports limited to 12 points");
  Eigen::VectorXd a(static_cast<Eigen::Index>(sp.size())), b(static_cast<Eigen::Index>(sq.size()));
  Eigen::MatrixXd c(a.size(), b.size());
  for (std::size_t i = 0; i < sp.size(); ++i) {
    a[static_cast<Eigen::Index>(i)] = p[sp[i]];
    for (std::size_t j = 0; j < sq.size(); ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cost(sp[i], sq[j]);
  }
  for (std::size_t j = 0; j < sq.size(); ++j) b[static_cast<Eigen::Index>(j)] = q[sq[j]];
  a /= a.sum();
  b /= b.sum();
  return solve_transport(a, b, c).cost;
}

struct DualityResult {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double gamma_star = 0.0;  // +inf when the dual is attained only in the limit
};

namespace detail {

inline double dual_value(const Eigen::MatrixXd& cost, const Eigen::VectorXd& ell,
                         const Eigen::VectorXd& q, double eps, double gamma) {
  double v = gamma * eps;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < ell.size(); ++j) {
      if (!std::isfinite(cost(i, j))) continue;
      best = std::max(best, ell[j] - (cost(i, j) == 0.0 ? 0.0 : gamma * cost(i, j)));
    }
    v += q[i] * best;
  }
  return v;
}

}  // namespace detail

/// Compares sup over the eps-Wasserstein ball around q of E[ell], solved as
/// an LP over couplings, with min over gamma >= 0 of
/// gamma eps + E_q[max_j (ell_j - gamma c_ij)], solved on a grid plus a
/// golden-section refinement. An empty grid picks [0, gamma_max] automatically.
inline DualityResult duality_check(const Eigen::MatrixXd& cost, const Eigen::VectorXd& ell,
                                   const Eigen::VectorXd& q, double eps,
                                   std::vector<double> gamma_grid = {}) {
  const Eigen::Index N = ell.size();
  detail::require(q.size() == N && cost.rows() == N && cost.cols() == N,
                  ErrorKind::ShapeError, "shape mismatch");
  detail::require((q.array() >= 0).all() && std::abs(q.sum() - 1.0) <= 1e-9,
                  ErrorKind::InvalidInput, "q must be a probability vector");
  detail::require(eps >= 0.0, ErrorKind::InvalidInput, "epsilon must be >= 0");
  for (Eigen::Index i = 0; i < N; ++i)
    detail::require(cost(i, i) == 0.0, ErrorKind::InvalidInput, "cost diagonal must be 0");

  // Primal: variables pi_ij on finite-cost cells of rows with q_i > 0.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
  for (Eigen::Index i = 0; i < N; ++i)
    if (q[i] > 0.0)
      for (Eigen::Index j = 0; j < N; ++j)
        if (std::isfinite(cost(i, j))) cells.emplace_back(i, j);
  const auto V = static_cast<Eigen::Index>(cells.size());
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < N; ++i)
    if (q[i] > 0.0) rows.push_back(i);
  LinearProgram lp;
  lp.c.resize(V);
  lp.A_eq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), V);
  lp.b_eq.resize(static_cast<Eigen::Index>(rows.size()));
  lp.A_ub = Eigen::MatrixXd::Zero(1, V);
  lp.b_ub = Eigen::VectorXd::Constant(1, eps);
  for (std::size_t r = 0; r < rows.size(); ++r) lp.b_eq[static_cast<Eigen::Index>(r)] = q[rows[r]];
  for (Eigen::Index v = 0; v < V; ++v) {
    const auto [i, j] = cells[static_cast<std::size_t>(v)];
    lp.c[v] = ell[j];
    const auto r = std::find(rows.begin(), rows.end(), i) - rows.begin();
    lp.A_eq(r, v) = 1.0;
    lp.A_ub(0, v) = cost(i, j);
  }
  const LpResult pr = solve_lp(lp);
  detail::require(pr.feasible && pr.bounded, ErrorKind::InvalidInput,
                  "duality primal is infeasible");

  DualityResult out;
  out.primal = pr.value;

  if (gamma_grid.empty()) {
    double gmax = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
      for (Eigen::Index j = 0; j < N; ++j)
        if (cost(i, j) > 0.0 && std::isfinite(cost(i, j)))
          gmax = std::max(gmax, (ell[j] - ell[i]) / cost(i, j));
    gmax = 1.1 * gmax + 1e-9;
    const int pts = 4001;
    for (int k = 0; k < pts; ++k) gamma_grid.push_back(gmax * k / (pts - 1));
  }
  std::sort(gamma_grid.begin(), gamma_grid.end());
  std::size_t arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < gamma_grid.size(); ++k) {
    detail::require(gamma_grid[k] >= 0.0, ErrorKind::InvalidInput, "gamma grid must be >= 0");
    const double d = detail::dual_value(cost, ell, q, eps, gamma_grid[k]);
    if (d < best) {
      best = d;
      arg = k;
    }
  }
  out.gamma_star = gamma_grid[arg];
  // Golden-section refinement of the convex dual between the grid neighbours.
  double lo = gamma_grid[arg > 0 ? arg - 1 : 0];
  double hi = gamma_grid[std::min(arg + 1, gamma_grid.size() - 1)];
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
    const double a = hi - ratio * (hi - lo), b = lo + ratio * (hi - lo);
    if (detail::dual_value(cost, ell, q, eps, a) <= detail::dual_value(cost, ell, q, eps, b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  const double refined = 0.5 * (lo + hi);
  const double dr = detail::dual_value(cost, ell, q, eps, refined);
  if (dr < best) {
    best = dr;
    out.gamma_star = refined;
  }
  if (eps == 0.0) {
    // gamma -> inf: only zero-cost moves survive.
    const double lim = detail::dual_value(
        cost.unaryExpr([](double c) {
          return c == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        }),
        ell, q, 0.0, 0.0);
    if (lim <= best) {
      best = lim;
      out.gamma_star = std::numeric_limits<double>::infinity();
    }
  }
  out.dual = best;
  out.gap = out.dual - out.primal;
  return out;
}

/// How the sup over eps-Monge maps enters each Rademacher sum.
enum class MongeSup {
  /// sum_i sigma_i sup_a f(a(z_i)): every point is replaced by its
  /// neighbourhood max of f, whatever its sign. This is the definition, and
  /// the distribution-free bound applies to it.
  Pointwise,
  /// sup over maps of sum_i sigma_i f(a(z_i)): the neighbourhood max where
  /// sigma_i = +1 and the min where sigma_i = -1. Larger than Pointwise and
  /// monotone in eps for every draw, but it does not shrink with n when
  /// eps > 0.
  SignAware,
};

struct SsmEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::vector<double> per_round;
};

namespace detail {

inline std::vector<double> cumulative(const Eigen::VectorXd& p) {
  std::vector<double> c(static_cast<std::size_t>(p.size()));
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) c[static_cast<std::size_t>(i)] = s += p[i];
  return c;
}

inline int draw(std::mt19937_64& rng, const std::vector<double>& cdf) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                   static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

inline double sign(std::mt19937_64& rng) { return (rng() >> 63) ? 1.0 : -1.0; }

inline int sample_count(int n, double frac) {
  return static_cast<int>(std::ceil(static_cast<double>(n) * frac - 1e-9));
}

/// sup_f (1/m) sum_i sigma_i v_f(z_i) with v chosen per sign.
inline double rademacher_sup(const Eigen::MatrixXd& hi, const Eigen::MatrixXd& lo,
                             const std::vector<int>& pts, const std::vector<double>& sig) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index f = 0; f < hi.rows(); ++f) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      s += sig[i] * (sig[i] > 0 ? hi(f, pts[i]) : lo(f, pts[i]));
    best = std::max(best, s / static_cast<double>(pts.size()));
  }
  return best;
}

inline SsmEstimate summarise(std::vector<double> rounds) {
  SsmEstimate e;
  double s = 0.0;
  for (double r : rounds) s += r;
  const auto R = static_cast<double>(rounds.size());
  e.mean = s / R;
  if (rounds.size() > 1) {
    double v = 0.0;
    for (double r : rounds) v += (r - e.mean) * (r - e.mean);
    e.stderr_ = std::sqrt(v / (R - 1.0) / R);
  }
  e.per_round = std::move(rounds);
  return e;
}

inline void check_class(const FiniteInstance& inst, const Eigen::MatrixXd& fn) {
  require(fn.rows() >= 1 && fn.rows() <= 200, ErrorKind::InvalidInput,
          "function class must hold 1..200 functions");
  require(fn.cols() == inst.num_points(), ErrorKind::ShapeError,
          "function class must have |Z| columns");
  require(fn.allFinite(), ErrorKind::InvalidInput, "function values must be finite");
}

}  // namespace detail

/// Classical empirical Rademacher complexity by Monte Carlo: each round draws
/// n points from p0 and n signs, alternating point then sign.
inline SsmEstimate classical_rademacher(const FiniteInstance& inst, const Eigen::MatrixXd& fn,
                                        int n, int mc_rounds, std::uint64_t seed) {
  inst.validate();
  detail::check_class(inst, fn);
  detail::require(n >= 1 && mc_rounds >= 1, ErrorKind::InvalidInput, "n and rounds must be >= 1");
  std::mt19937_64 rng(seed);
  const auto cdf = detail::cumulative(inst.p0);
  std::vector<double> rounds;
  std::vector<int> pts(static_cast<std::size_t>(n));
  std::vector<double> sig(static_cast<std::size_t>(n));
  for (int r = 0; r < mc_rounds; ++r) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      pts[i] = detail::draw(rng, cdf);
      sig[i] = detail::sign(rng);
    }
    rounds.push_back(detail::rademacher_sup(fn, fn, pts, sig));
  }
  return detail::summarise(std::move(rounds));
}

/// Semi-supervised Monge Rademacher complexity
/// eta g_l(ceil(n eta)) + (1 - eta) g_ul(ceil(n (1 - eta))) by Monte Carlo.
/// The labeled part follows the sampling protocol of classical_rademacher;
/// the unlabeled part then draws features from the X-marginal and one sign
/// per point, shared by the |Y| label terms.
inline SsmEstimate ssm_rademacher(const FiniteInstance& inst, const Eigen::MatrixXd& fn,
                                  double eps, double eta, int n, int mc_rounds,
                                  std::uint64_t seed, MongeSup mode = MongeSup::Pointwise) {
  inst.validate();
  detail::check_class(inst, fn);
  detail::require(eps >= 0.0, ErrorKind::InvalidInput, "epsilon must be >= 0");
  detail::require(eta >= 0.0 && eta <= 1.0, ErrorKind::InvalidInput, "eta must lie in [0, 1]");
  detail::require(n >= 1 && mc_rounds >= 1, ErrorKind::InvalidInput, "n and rounds must be >= 1");
  const int N = inst.num_points();
  // Neighbourhood extrema of every function around every point.
  Eigen::MatrixXd hi(fn.rows(), N), lo(fn.rows(), N);
  for (int z = 0; z < N; ++z) {
    for (Eigen::Index f = 0; f < fn.rows(); ++f) {
      double mx = fn(f, z), mn = fn(f, z);
      for (int w = 0; w < N; ++w) {
        if (inst.cost(z, w) <= eps) {
          mx = std::max(mx, fn(f, w));
          mn = std::min(mn, fn(f, w));
        }
      }
      hi(f, z) = mx;
      lo(f, z) = mode == MongeSup::SignAware ? mn : mx;
    }
  }
  const int ml = detail::sample_count(n, eta);
  const int mu = detail::sample_count(n, 1.0 - eta);
  std::mt19937_64 rng(seed);
  const auto cdf_z = detail::cumulative(inst.p0);
  const auto cdf_x = detail::cumulative(inst.marginal_x());
  std::vector<double> rounds;
  for (int r = 0; r < mc_rounds; ++r) {
    double gl = 0.0, gul = 0.0;
    if (ml > 0) {
      std::vector<int> pts(static_cast<std::size_t>(ml));
      std::vector<double> sig(static_cast<std::size_t>(ml));
      for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i] = detail::draw(rng, cdf_z);
        sig[i] = detail::sign(rng);
      }
      gl = detail::rademacher_sup(hi, lo, pts, sig);
    }
    if (mu > 0) {
      std::vector<int> xs(static_cast<std::size_t>(mu));
      std::vector<double> sig(static_cast<std::size_t>(mu));
      for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = detail::draw(rng, cdf_x);
        sig[i] = detail::sign(rng);
      }
      std::vector<int> pts(xs.size());
      for (int y = 0; y < inst.num_y; ++y) {
        for (std::size_t i = 0; i < xs.size(); ++i) pts[i] = inst.point(xs[i], y);
        gul += detail::rademacher_sup(hi, lo, pts, sig);
      }
    }
    rounds.push_back(eta * gl + (1.0 - eta) * gul);
  }
  return detail::summarise(std::move(rounds));
}

struct BoundCheck {
  bool holds = false;         // estimate - 3 se <= bound
  bool holds_strict = false;  // estimate + 3 se <= bound
  double estimate = 0.0;
  double stderr_ = 0.0;
  double bound = 0.0;
};

/// eta Delta(ceil(n eta)) + (1 - eta) |Y| Delta(ceil(n (1 - eta))); a term
/// with zero weight or zero samples contributes nothing.
inline double dist_free_bound(const std::function<double(int)>& delta, double eta, int n,
                              int num_y) {
  const int ml = detail::sample_count(n, eta);
  const int mu = detail::sample_count(n, 1.0 - eta);
  double b = 0.0;
  if (eta > 0.0 && ml > 0) b += eta * delta(ml);
  if (eta < 1.0 && mu > 0) b += (1.0 - eta) * num_y * delta(mu);
  return b;
}

inline BoundCheck dist_free_bound_check(const FiniteInstance& inst, const Eigen::MatrixXd& fn,
                                        const std::function<double(int)>& delta, double eps,
                                        double eta, int n, int mc_rounds, std::uint64_t seed) {
  const SsmEstimate e = ssm_rademacher(inst, fn, eps, eta, n, mc_rounds, seed);
  BoundCheck out;
  out.estimate = e.mean;
  out.stderr_ = e.stderr_;
  out.bound = dist_free_bound(delta, eta, n, inst.num_y);
  out.holds = e.mean - 3.0 * e.stderr_ <= out.bound;
  out.holds_strict = e.mean + 3.0 * e.stderr_ <= out.bound;
  return out;
}

}  // namespace ssdrl

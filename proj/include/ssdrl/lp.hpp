#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ssdrl/error.hpp"

namespace ssdrl {

/// maximise c'x subject to A_eq x = b_eq, A_ub x <= b_ub, x >= 0.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_ub;
  Eigen::VectorXd b_ub;
};

struct LpResult {
  bool feasible = false;
  bool bounded = true;
  double value = 0.0;
  Eigen::VectorXd x;
};

namespace detail {

// Dense tableau. Column `cols` holds the right-hand side, row `rows` the
// reduced costs of the current objective.
class Tableau {
 public:
  Tableau(Eigen::MatrixXd t, std::vector<int> basis, double tol)
      : t_(std::move(t)), basis_(std::move(basis)), tol_(tol) {}

  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }

  /// Installs max c'x as the objective row, expressed in the current basis.
  void set_objective(const Eigen::VectorXd& c) {
    t_.row(rows()).setZero();
    t_.row(rows()).head(c.size()) = -c.transpose();
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double cb = basis_[static_cast<std::size_t>(i)] < c.size()
                            ? c[basis_[static_cast<std::size_t>(i)]]
                            : 0.0;
      if (cb != 0.0) t_.row(rows()) += cb * t_.row(i);
    }
  }

  /// Bland's rule pivoting. Columns with allowed[j] == false never enter.
  /// Returns false when the objective is unbounded.
  bool optimise(const std::vector<char>& allowed) {
    for (int iter = 0; iter < 100000; ++iter) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < cols(); ++j) {
        if (allowed[static_cast<std::size_t>(j)] && t_(rows(), j) < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows(); ++i) {
        const double a = t_(i, enter);
        if (a <= tol_) continue;
        const double r = t_(i, cols()) / a;
        if (r < best - tol_ ||
            (r <= best + tol_ && leave >= 0 &&
             basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          best = std::min(best, r);
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw Error(ErrorKind::InvalidInput, "simplex iteration limit reached");
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i <= rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }

  double objective() const { return t_(rows(), cols()); }
  double rhs(Eigen::Index i) const { return t_(i, cols()); }
  double at(Eigen::Index i, Eigen::Index j) const { return t_(i, j); }
  int basic(Eigen::Index i) const { return basis_[static_cast<std::size_t>(i)]; }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
  double tol_;
};

}  // namespace detail

/// Two-phase simplex with Bland's rule. Meant for the small programs of the
/// theory checks, not for large problems.
inline LpResult solve_lp(const LinearProgram& lp, double tol = 1e-11) {
  const Eigen::Index n = lp.c.size();
  const Eigen::Index me = lp.A_eq.rows(), mu = lp.A_ub.rows();
  detail::require(me == 0 || lp.A_eq.cols() == n, ErrorKind::ShapeError, "A_eq shape");
  detail::require(mu == 0 || lp.A_ub.cols() == n, ErrorKind::ShapeError, "A_ub shape");
  detail::require(lp.b_eq.size() == me && lp.b_ub.size() == mu, ErrorKind::ShapeError,
                  "rhs shape");
  const Eigen::Index m = me + mu;
  // Columns: original, one slack per inequality, one artificial per row.
  const Eigen::Index ns = mu, na = m;
  const Eigen::Index N = n + ns + na;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, N + 1);
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool eq = i < me;
    Eigen::RowVectorXd row = eq ? Eigen::RowVectorXd(lp.A_eq.row(i))
                                : Eigen::RowVectorXd(lp.A_ub.row(i - me));
    double b = eq ? lp.b_eq[i] : lp.b_ub[i - me];
    double slack = eq ? 0.0 : 1.0;
    if (b < 0.0) {
      row = -row;
      b = -b;
      slack = -slack;
    }
    t.block(i, 0, 1, n) = row;
    if (!eq) t(i, n + (i - me)) = slack;
    t(i, n + ns + i) = 1.0;
    t(i, N) = b;
    basis[static_cast<std::size_t>(i)] = static_cast<int>(n + ns + i);
  }
  detail::Tableau tab(std::move(t), std::move(basis), tol);

  // Phase one: maximise minus the sum of artificials.
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(N);
  c1.tail(na).setConstant(-1.0);
  tab.set_objective(c1);
  std::vector<char> allowed(static_cast<std::size_t>(N), 1);
  tab.optimise(allowed);
  LpResult res;
  const double scale = 1.0 + (lp.b_eq.size() ? lp.b_eq.cwiseAbs().sum() : 0.0) +
                       (lp.b_ub.size() ? lp.b_ub.cwiseAbs().sum() : 0.0);
  if (tab.objective() < -1e-9 * scale) return res;
  res.feasible = true;

  // Push artificials still in the basis (at level zero) out where possible.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basic(i) < n + ns) continue;
    for (Eigen::Index j = 0; j < n + ns; ++j) {
      if (std::abs(tab.at(i, j)) > tol) {
        tab.pivot(i, j);
        break;
      }
    }
  }
  for (Eigen::Index j = n + ns; j < N; ++j) allowed[static_cast<std::size_t>(j)] = 0;

  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(N);
  c2.head(n) = lp.c;
  tab.set_objective(c2);
  if (!tab.optimise(allowed)) {
    res.bounded = false;
    res.value = std::numeric_limits<double>::infinity();
    return res;
  }
  res.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i)
    if (tab.basic(i) < n) res.x[tab.basic(i)] = std::max(0.0, tab.rhs(i));
  res.value = lp.c.dot(res.x);
  return res;
}

struct TransportResult {
  double cost = 0.0;
  Eigen::MatrixXd plan;  // supply x demand
};

/// Balanced transportation problem by the transportation simplex (potentials
/// plus cycle pivots on the spanning tree of basic cells). Cells with infinite
/// cost may carry no mass; if the marginals force mass onto one, the optimum
/// is +inf.
inline TransportResult solve_transport(const Eigen::VectorXd& supply,
                                       const Eigen::VectorXd& demand,
                                       const Eigen::MatrixXd& cost) {
  const Eigen::Index m = supply.size(), n = demand.size();
  detail::require(m > 0 && n > 0, ErrorKind::InvalidInput, "empty marginals");
  detail::require(cost.rows() == m && cost.cols() == n, ErrorKind::ShapeError,
                  "cost shape does not match marginals");
  detail::require((supply.array() >= 0).all() && (demand.array() >= 0).all(),
                  ErrorKind::InvalidInput, "negative mass");
  const double total = supply.sum();
  detail::require(std::abs(total - demand.sum()) <= 1e-9 * (1.0 + total),
                  ErrorKind::InvalidInput, "unbalanced marginals");

  double finite_max = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      detail::require(!std::isnan(cost(i, j)) && cost(i, j) >= 0.0, ErrorKind::InvalidInput,
                      "costs must be nonnegative");
      if (std::isfinite(cost(i, j))) finite_max = std::max(finite_max, cost(i, j));
    }
  const double big = 1e6 * (1.0 + finite_max);
  Eigen::MatrixXd c = cost.unaryExpr([big](double v) { return std::isfinite(v) ? v : big; });

  Eigen::VectorXd a = supply, b = demand;
  b[n - 1] += a.sum() - b.sum();  // absorb rounding so the problem balances exactly
  b[n - 1] = std::max(b[n - 1], 0.0);

  // North-west corner start: exactly m + n - 1 basic cells, some possibly at 0.
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, n);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> basis;
  {
    Eigen::VectorXd ra = a, rb = b;
    Eigen::Index i = 0, j = 0;
    for (;;) {
      const double f = std::min(ra[i], rb[j]);
      x(i, j) = f;
      ra[i] -= f;
      rb[j] -= f;
      basis.emplace_back(i, j);
      if (i == m - 1 && j == n - 1) break;
      if (j == n - 1 || (i < m - 1 && ra[i] <= rb[j])) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double tol = 1e-12 * (1.0 + c.cwiseAbs().maxCoeff());
  std::vector<double> u(static_cast<std::size_t>(m)), v(static_cast<std::size_t>(n));
  for (int iter = 0; iter < 100000; ++iter) {
    // Potentials from u_i + v_j = c_ij on basic cells.
    std::vector<char> ku(static_cast<std::size_t>(m), 0), kv(static_cast<std::size_t>(n), 0);
    u[0] = 0.0;
    ku[0] = 1;
    for (bool changed = true; changed;) {
      changed = false;
      for (auto [i, j] : basis) {
        const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
        if (ku[si] && !kv[sj]) {
          v[sj] = c(i, j) - u[si];
          kv[sj] = 1;
          changed = true;
        } else if (!ku[si] && kv[sj]) {
          u[si] = c(i, j) - v[sj];
          ku[si] = 1;
          changed = true;
        }
      }
    }
    // Most negative reduced cost enters.
    Eigen::Index ei = -1, ej = -1;
    double best = -tol;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = c(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)];
        if (d < best) {
          best = d;
          ei = i;
          ej = j;
        }
      }
    if (ei < 0) break;

    // Tree path from row node ei to column node ej; nodes are rows 0..m-1
    // followed by columns m..m+n-1, edges are basic cells.
    const Eigen::Index nodes = m + n;
    std::vector<int> via(static_cast<std::size_t>(nodes), -1);
    std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
    std::queue<Eigen::Index> q;
    q.push(ei);
    seen[static_cast<std::size_t>(ei)] = 1;
    while (!q.empty()) {
      const Eigen::Index node = q.front();
      q.pop();
      for (std::size_t e = 0; e < basis.size(); ++e) {
        const auto [bi, bj] = basis[e];
        Eigen::Index other = -1;
        if (node < m && bi == node) other = m + bj;
        if (node >= m && bj == node - m) other = bi;
        if (other < 0 || seen[static_cast<std::size_t>(other)]) continue;
        seen[static_cast<std::size_t>(other)] = 1;
        via[static_cast<std::size_t>(other)] = static_cast<int>(e);
        q.push(other);
      }
    }
    std::vector<std::size_t> path;  // from the column end back to row ei
    for (Eigen::Index node = m + ej; node != ei;) {
      const auto e = static_cast<std::size_t>(via[static_cast<std::size_t>(node)]);
      path.push_back(e);
      const auto [bi, bj] = basis[e];
      node = node >= m ? bi : m + bj;
    }
    // Signs along the cycle, entering cell first: -, +, -, ...
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = 0;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const auto [bi, bj] = basis[path[p]];
      if (x(bi, bj) < theta) {
        theta = x(bi, bj);
        leave = path[p];
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p) {
      const auto [bi, bj] = basis[path[p]];
      x(bi, bj) += (p % 2 == 0) ? -theta : theta;
      if (x(bi, bj) < 0.0) x(bi, bj) = 0.0;
    }
    x(ei, ej) = theta;
    const auto [li, lj] = basis[leave];
    x(li, lj) = 0.0;
    basis[leave] = {ei, ej};
  }

  TransportResult out;
  out.plan = x;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (x(i, j) <= 0.0) continue;
      if (!std::isfinite(cost(i, j))) {
        if (x(i, j) > 1e-12) out.cost = std::numeric_limits<double>::infinity();
        continue;
      }
      out.cost += x(i, j) * cost(i, j);
    }
  return out;
}

}  // namespace ssdrl

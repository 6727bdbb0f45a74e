#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ssdrl/adversary.hpp"
#include "ssdrl/error.hpp"
#include "ssdrl/models.hpp"
#include "ssdrl/softmin.hpp"

namespace ssdrl {

/// Examples split into labeled and unlabeled index sets. Labels of unlabeled
/// points are moved out of the examples into hidden_labels(), which only
/// evaluation code should read.
class SemiDataset {
 public:
  SemiDataset() = default;

  SemiDataset(std::vector<Example> examples, const std::vector<std::size_t>& labeled)
      : examples_(std::move(examples)), hidden_(examples_.size()) {
    std::vector<char> is_labeled(examples_.size(), 0);
    for (std::size_t i : labeled) {
      detail::require(i < examples_.size(), ErrorKind::InvalidInput,
                      "labeled index out of range");
      detail::require(!is_labeled[i], ErrorKind::InvalidInput, "duplicate labeled index");
      is_labeled[i] = 1;
    }
    std::optional<Eigen::Index> dim;
    for (std::size_t i = 0; i < examples_.size(); ++i) {
      auto& z = examples_[i];
      detail::require(z.features.allFinite(), ErrorKind::InvalidInput,
                      "features must be finite");
      if (!dim) dim = z.features.size();
      detail::require(z.features.size() == *dim, ErrorKind::ShapeError,
                      "examples differ in dimension");
      if (is_labeled[i]) {
        detail::require(z.label.has_value(), ErrorKind::MissingLabel,
                        "labeled index without a label");
        labeled_.push_back(i);
      } else {
        hidden_[i] = z.label;
        z.label.reset();
        unlabeled_.push_back(i);
      }
    }
  }

  const std::vector<Example>& examples() const { return examples_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const { return examples_.size(); }
  const std::vector<std::size_t>& labeled() const { return labeled_; }
  const std::vector<std::size_t>& unlabeled() const { return unlabeled_; }
  const std::vector<std::optional<int>>& hidden_labels() const { return hidden_; }

  double eta() const {
    return examples_.empty() ? 0.0
                             : static_cast<double>(labeled_.size()) /
                                   static_cast<double>(examples_.size());
  }

  /// The labeled part alone, as a fully supervised dataset.
  SemiDataset labeled_only() const {
    std::vector<Example> ex;
    std::vector<std::size_t> idx;
    for (std::size_t i : labeled_) {
      idx.push_back(ex.size());
      ex.push_back(examples_[i]);
    }
    return SemiDataset(std::move(ex), idx);
  }

 private:
  std::vector<Example> examples_;
  std::vector<std::optional<int>> hidden_;
  std::vector<std::size_t> labeled_;
  std::vector<std::size_t> unlabeled_;
};

enum class Mode { SSDRL, FSSDRL, DRL, PL, EM, HardMin, HardMax };
enum class TieBreak { Lowest, Random };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::SSDRL: return "SSDRL";
    case Mode::FSSDRL: return "F-SSDRL";
    case Mode::DRL: return "DRL";
    case Mode::PL: return "PL";
    case Mode::EM: return "EM";
    case Mode::HardMin: return "HARD_MIN";
    case Mode::HardMax: return "HARD_MAX";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::SSDRL, Mode::FSSDRL, Mode::DRL, Mode::PL, Mode::EM, Mode::HardMin,
                 Mode::HardMax})
    if (to_string(m) == s) return m;
  if (s == "FSSDRL") return Mode::FSSDRL;
  throw Error(ErrorKind::InvalidInput, "unknown mode '" + s + "'");
}

struct TrainConfig {
  Mode mode = Mode::SSDRL;
  double gamma = kInf;
  Lambda lambda{-1.0};
  double alpha = 0.1;
  int T = 100;
  int k = 1;
  double delta = 0.0;
  int top_k = 0;  // F-SSDRL only
  double projection_radius = kInf;
  double epsilon_report = 0.0;
  std::uint64_t seed = 0;
  double kappa = 1.0;
  int ascent_steps = 5;
  /// Stop once the batch gradient norm falls to this value. 0 runs all T steps.
  double grad_tol = 0.0;
  /// Worker threads for per-example terms. Results do not depend on it.
  int threads = 1;
  TieBreak tie_break = TieBreak::Lowest;
  int max_halvings = 60;

  /// Defaults with the mode's fixed gamma / lambda filled in.
  static TrainConfig for_mode(Mode m) {
    TrainConfig c;
    c.mode = m;
    if (m == Mode::PL) c.lambda = Lambda::neg_inf();
    if (m == Mode::EM) c.lambda = Lambda(-1.0);
    if (m == Mode::HardMin) c.lambda = Lambda::neg_inf();
    if (m == Mode::HardMax) c.lambda = Lambda::pos_inf();
    return c;
  }

  AttackConfig attack() const { return AttackConfig{gamma, kappa, ascent_steps, delta}; }

  void validate() const {
    using detail::require;
    attack().validate();
    require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidInput,
            "alpha must be finite and >= 0");
    require(T >= 0, ErrorKind::InvalidInput, "T must be >= 0");
    require(k >= 1, ErrorKind::InvalidInput, "batch size must be >= 1");
    require(projection_radius > 0.0, ErrorKind::InvalidInput, "radius must be > 0");
    require(epsilon_report >= 0.0, ErrorKind::InvalidInput, "epsilon_report must be >= 0");
    require(threads >= 1, ErrorKind::InvalidInput, "threads must be >= 1");
    require(max_halvings >= 0, ErrorKind::InvalidInput, "max_halvings must be >= 0");
    switch (mode) {
      case Mode::PL:
        require(std::isinf(gamma) && lambda.is_neg_inf(), ErrorKind::InvalidInput,
                "PL requires gamma = inf and lambda = -inf");
        break;
      case Mode::EM:
        require(std::isinf(gamma) && lambda.value() == -1.0, ErrorKind::InvalidInput,
                "EM requires gamma = inf and lambda = -1");
        break;
      case Mode::HardMin:
        require(lambda.is_neg_inf(), ErrorKind::InvalidInput, "HARD_MIN requires lambda = -inf");
        break;
      case Mode::HardMax:
        require(lambda.is_pos_inf(), ErrorKind::InvalidInput, "HARD_MAX requires lambda = +inf");
        break;
      case Mode::FSSDRL:
        require(top_k >= 1, ErrorKind::InvalidInput, "F-SSDRL requires top_k >= 1");
        break;
      default: break;
    }
  }
};

struct TrainTrace {
  ParamVector theta_final;
  std::vector<double> risk_history;
  std::vector<double> gradnorm_history;
  double wallclock = 0.0;
  /// Hard-label training only: the label chosen for every unlabeled point at
  /// each iteration, in unlabeled-index order.
  std::vector<std::vector<int>> label_history;
};

/// Raised when theta stops being finite; carries the trace so far.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, TrainTrace trace)
      : Error(ErrorKind::DivergedTraining, what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

namespace detail {

// Per-example terms are summed in fixed-size chunks whose partial sums are
// combined in chunk order, so the thread count never changes a result.
inline constexpr std::size_t kChunk = 32;

template <class F>
void parallel_for(std::size_t count, int threads, F&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  const auto nt = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

inline Lambda effective_lambda(const TrainConfig& cfg) {
  switch (cfg.mode) {
    case Mode::PL:
    case Mode::HardMin: return Lambda::neg_inf();
    case Mode::HardMax: return Lambda::pos_inf();
    case Mode::EM: return Lambda(-1.0);
    default: return cfg.lambda;
  }
}

template <DifferentiableLoss M>
Eigen::VectorXd clean_losses(const M& m, const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& x) {
  if constexpr (HasLabelLosses<M>) {
    return m.label_losses(theta, x);
  } else {
    Eigen::VectorXd out(m.num_classes());
    for (int y = 0; y < m.num_classes(); ++y) out[y] = m.loss(theta, x, y);
    return out;
  }
}

/// phi_gamma for each candidate label of an unlabeled point, plus the maximisers.
struct LabelScores {
  std::vector<int> labels;
  Eigen::VectorXd J;
  std::vector<Eigen::VectorXd> xs;  // empty in no-attack mode
};

template <DifferentiableLoss M>
LabelScores label_scores(const M& m, const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                         const TrainConfig& cfg, const AttackConfig& ac) {
  LabelScores s;
  const int C = m.num_classes();
  const bool restrict = cfg.mode == Mode::FSSDRL && cfg.top_k < C;
  Eigen::VectorXd clean;
  if (ac.no_attack() || restrict) clean = clean_losses(m, theta, x);
  if (restrict) {
    std::vector<int> order(static_cast<std::size_t>(C));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return clean[a] < clean[b]; });
    order.resize(static_cast<std::size_t>(cfg.top_k));
    std::sort(order.begin(), order.end());
    s.labels = std::move(order);
  } else {
    s.labels.resize(static_cast<std::size_t>(C));
    std::iota(s.labels.begin(), s.labels.end(), 0);
  }
  const auto L = static_cast<Eigen::Index>(s.labels.size());
  s.J.resize(L);
  for (Eigen::Index j = 0; j < L; ++j) {
    const int y = s.labels[static_cast<std::size_t>(j)];
    if (ac.no_attack()) {
      s.J[j] = clean[y];
    } else {
      auto a = ascend(m, theta, x, y, ac);
      s.J[j] = a.objective;
      s.xs.push_back(std::move(a.x));
    }
  }
  return s;
}

/// Adversarial loss and its theta-gradient for a fixed label.
template <DifferentiableLoss M>
double labeled_term(const M& m, const Eigen::VectorXd& theta, const Eigen::VectorXd& x, int y,
                    const AttackConfig& ac, Eigen::VectorXd* grad) {
  if (ac.no_attack()) {
    if (grad != nullptr) *grad += m.grad_theta(theta, x, y);
    return m.loss(theta, x, y);
  }
  auto a = ascend(m, theta, x, y, ac);
  if (grad != nullptr) *grad += m.grad_theta(theta, a.x, y);
  return a.objective;
}

template <DifferentiableLoss M>
double unlabeled_term(const M& m, const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                      const TrainConfig& cfg, const AttackConfig& ac, Lambda lam,
                      Eigen::VectorXd* grad) {
  const LabelScores s = label_scores(m, theta, x, cfg, ac);
  const double value = softmin(s.J, lam);
  if (grad == nullptr) return value;
  const ProbVector q = softmin_weights(s.J, lam);
  if constexpr (HasSoftGradient<M>) {
    if (ac.no_attack()) {
      Eigen::VectorXd target = Eigen::VectorXd::Zero(m.num_classes());
      for (std::size_t j = 0; j < s.labels.size(); ++j)
        target[s.labels[j]] = q[static_cast<Eigen::Index>(j)];
      *grad += m.grad_theta_soft(theta, x, target);
      return value;
    }
  }
  for (std::size_t j = 0; j < s.labels.size(); ++j) {
    const double w = q[static_cast<Eigen::Index>(j)];
    if (w == 0.0) continue;
    const Eigen::VectorXd& xj = ac.no_attack() ? x : s.xs[j];
    *grad += w * m.grad_theta(theta, xj, s.labels[j]);
  }
  return value;
}

/// Sum over `indices` of the per-example terms, divided by `norm`. Entries of
/// `forced` that are >= 0 pin the label of an unlabeled point.
template <DifferentiableLoss M>
double batch_objective(const M& m, const Eigen::VectorXd& theta, const SemiDataset& data,
                       const std::vector<std::size_t>& indices, const TrainConfig& cfg,
                       Eigen::VectorXd* grad, double norm,
                       const std::vector<int>* forced = nullptr) {
  const AttackConfig ac = cfg.attack();
  const Lambda lam = effective_lambda(cfg);
  const std::size_t chunks = (indices.size() + kChunk - 1) / kChunk;
  std::vector<double> vals(chunks, 0.0);
  std::vector<Eigen::VectorXd> grads(grad != nullptr ? chunks : 0);
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    Eigen::VectorXd* g = nullptr;
    if (grad != nullptr) {
      grads[c] = Eigen::VectorXd::Zero(theta.size());
      g = &grads[c];
    }
    double v = 0.0;
    const std::size_t end = std::min(indices.size(), (c + 1) * kChunk);
    for (std::size_t p = c * kChunk; p < end; ++p) {
      const std::size_t i = indices[p];
      const Example& z = data[i];
      if (z.label) {
        v += labeled_term(m, theta, z.features, *z.label, ac, g);
      } else if (forced != nullptr && (*forced)[i] >= 0) {
        v += labeled_term(m, theta, z.features, (*forced)[i], ac, g);
      } else {
        v += unlabeled_term(m, theta, z.features, cfg, ac, lam, g);
      }
    }
    vals[c] = v;
  });
  double total = 0.0;
  for (double v : vals) total += v;
  if (grad != nullptr) {
    grad->setZero(theta.size());
    for (const auto& g : grads) *grad += g;
    *grad /= norm;
  }
  return total / norm;
}

inline double reporting_term(const TrainConfig& cfg) {
  return cfg.epsilon_report > 0.0 && std::isfinite(cfg.gamma) ? cfg.gamma * cfg.epsilon_report
                                                              : 0.0;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

inline void project(Eigen::VectorXd& theta, double radius) {
  if (!std::isfinite(radius)) return;
  const double nrm = theta.norm();
  if (nrm > radius) theta *= radius / nrm;
}

}  // namespace detail

/// Full-batch SSAR risk. DRL mode averages over the labeled points only.
/// gamma * epsilon_report is added when epsilon_report > 0 and gamma is finite.
template <DifferentiableLoss M>
double ssar_risk(const M& model, const Eigen::VectorXd& theta, const SemiDataset& data,
                 const TrainConfig& cfg) {
  cfg.validate();
  detail::require(data.size() > 0, ErrorKind::InvalidInput, "empty dataset");
  if (cfg.mode == Mode::DRL) {
    detail::require(!data.labeled().empty(), ErrorKind::InvalidInput,
                    "DRL needs labeled data");
    return detail::batch_objective(model, theta, data, data.labeled(), cfg, nullptr,
                                   static_cast<double>(data.labeled().size())) +
           detail::reporting_term(cfg);
  }
  return detail::batch_objective(model, theta, data, detail::all_indices(data.size()), cfg,
                                 nullptr, static_cast<double>(data.size())) +
         detail::reporting_term(cfg);
}

/// Gradient of the batch objective, each term weighted by 1 / |batch|.
/// DRL mode drops unlabeled indices from the batch.
template <DifferentiableLoss M>
Eigen::VectorXd ssar_gradient(const M& model, const Eigen::VectorXd& theta,
                              std::vector<std::size_t> batch, const SemiDataset& data,
                              const TrainConfig& cfg) {
  cfg.validate();
  for (std::size_t i : batch)
    detail::require(i < data.size(), ErrorKind::InvalidInput, "batch index out of range");
  if (cfg.mode == Mode::DRL)
    std::erase_if(batch, [&](std::size_t i) { return !data[i].label.has_value(); });
  detail::require(!batch.empty(), ErrorKind::InvalidInput, "empty batch");
  std::sort(batch.begin(), batch.end());
  Eigen::VectorXd g;
  detail::batch_objective(model, theta, data, batch, cfg, &g,
                          static_cast<double>(batch.size()));
  return g;
}

/// Mini-batch SGD with projection onto the L2 ball of projection_radius.
/// risk_history[t] is the batch objective at theta_t, which is the full risk
/// when k equals the dataset size.
template <DifferentiableLoss M>
TrainTrace sgd_train(const M& model, const Eigen::VectorXd& theta0, const SemiDataset& input,
                     const TrainConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  SemiDataset drl_view;
  const SemiDataset* data = &input;
  if (cfg.mode == Mode::DRL) {
    drl_view = input.labeled_only();
    data = &drl_view;
  }
  const std::size_t n = data->size();
  detail::require(n > 0, ErrorKind::InvalidInput, "no training examples");
  detail::require(static_cast<std::size_t>(cfg.k) <= n, ErrorKind::InvalidInput,
                  "batch size exceeds dataset size");

  TrainTrace trace;
  Eigen::VectorXd theta = theta0;
  detail::project(theta, cfg.projection_radius);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> pool = detail::all_indices(n);
  const auto k = static_cast<std::size_t>(cfg.k);
  const double extra = detail::reporting_term(cfg);
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  for (int t = 0; t < cfg.T; ++t) {
    std::vector<std::size_t> batch;
    if (k == n) {
      batch = pool;
    } else {
      for (std::size_t j = 0; j < k; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, n - 1);
        std::swap(pool[j], pool[pick(rng)]);
      }
      batch.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(batch.begin(), batch.end());
    }
    Eigen::VectorXd g;
    const double risk = detail::batch_objective(model, theta, *data, batch, cfg, &g,
                                                static_cast<double>(k));
    const double gn = g.norm();
    trace.risk_history.push_back(risk + extra);
    trace.gradnorm_history.push_back(gn);
    if (!std::isfinite(risk) || !std::isfinite(gn)) {
      trace.theta_final = ParamVector(theta);
      trace.wallclock = elapsed();
      throw TrainingDiverged("non-finite risk or gradient", std::move(trace));
    }
    if (cfg.grad_tol > 0.0 && gn <= cfg.grad_tol) break;
    Eigen::VectorXd next = theta - cfg.alpha * g;
    detail::project(next, cfg.projection_radius);
    if (!next.allFinite()) {
      trace.theta_final = ParamVector(theta);
      trace.wallclock = elapsed();
      throw TrainingDiverged("parameters became non-finite", std::move(trace));
    }
    theta = std::move(next);
  }
  trace.theta_final = ParamVector(theta);
  trace.wallclock = elapsed();
  return trace;
}

namespace detail {

/// Exact per-point label decisions for hard-label training: arg-min of phi for
/// HARD_MIN, arg-max for HARD_MAX.
template <DifferentiableLoss M>
std::vector<int> hard_assignment(const M& m, const Eigen::VectorXd& theta,
                                 const SemiDataset& data, const TrainConfig& cfg,
                                 std::mt19937_64& rng) {
  const AttackConfig ac = cfg.attack();
  const auto& ul = data.unlabeled();
  std::vector<Eigen::VectorXd> scores(ul.size());
  TrainConfig all = cfg;
  all.mode = Mode::SSDRL;  // every label is a candidate
  parallel_for(ul.size(), cfg.threads, [&](std::size_t j) {
    scores[j] = label_scores(m, theta, data[ul[j]].features, all, ac).J;
  });
  std::vector<int> forced(data.size(), -1);
  const bool want_min = cfg.mode == Mode::HardMin;
  for (std::size_t j = 0; j < ul.size(); ++j) {
    const Eigen::VectorXd& J = scores[j];
    const double target = want_min ? J.minCoeff() : J.maxCoeff();
    std::vector<int> ties;
    for (Eigen::Index y = 0; y < J.size(); ++y)
      if (J[y] == target) ties.push_back(static_cast<int>(y));
    int pick = ties.front();
    if (cfg.tie_break == TieBreak::Random && ties.size() > 1) {
      std::uniform_int_distribution<std::size_t> u(0, ties.size() - 1);
      pick = ties[u(rng)];
    }
    forced[ul[j]] = pick;
  }
  return forced;
}

}  // namespace detail

/// Alternates exact hard label decisions with full-batch gradient steps. A
/// step that would raise the objective is retried with half the step size,
/// so the recorded objective never increases.
template <DifferentiableLoss M>
TrainTrace hard_label_train(const M& model, const Eigen::VectorXd& theta0,
                            const SemiDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  detail::require(cfg.mode == Mode::HardMin || cfg.mode == Mode::HardMax,
                  ErrorKind::InvalidInput, "hard_label_train needs HARD_MIN or HARD_MAX");
  detail::require(data.size() > 0, ErrorKind::InvalidInput, "no training examples");
  const auto t_start = std::chrono::steady_clock::now();
  const auto idx = detail::all_indices(data.size());
  const auto n = static_cast<double>(data.size());
  std::mt19937_64 rng(cfg.seed);
  const double extra = detail::reporting_term(cfg);

  struct State {
    Eigen::VectorXd theta, grad;
    std::vector<int> labels;
    double value = 0.0;
  };
  auto evaluate = [&](Eigen::VectorXd theta) {
    State s;
    s.labels = detail::hard_assignment(model, theta, data, cfg, rng);
    s.value = detail::batch_objective(model, theta, data, idx, cfg, &s.grad, n, &s.labels);
    s.theta = std::move(theta);
    return s;
  };
  auto unlabeled_labels = [&](const std::vector<int>& forced) {
    std::vector<int> out;
    for (std::size_t i : data.unlabeled()) out.push_back(forced[i]);
    return out;
  };

  Eigen::VectorXd start = theta0;
  detail::project(start, cfg.projection_radius);
  State cur = evaluate(std::move(start));
  TrainTrace trace;
  double alpha = cfg.alpha;
  for (int t = 0; t < cfg.T; ++t) {
    trace.risk_history.push_back(cur.value + extra);
    trace.gradnorm_history.push_back(cur.grad.norm());
    trace.label_history.push_back(unlabeled_labels(cur.labels));
    if (!std::isfinite(cur.value) || !cur.grad.allFinite()) {
      trace.theta_final = ParamVector(cur.theta);
      throw TrainingDiverged("non-finite objective", std::move(trace));
    }
    if (cfg.grad_tol > 0.0 && cur.grad.norm() <= cfg.grad_tol) break;
    bool moved = false;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      Eigen::VectorXd cand = cur.theta - alpha * cur.grad;
      detail::project(cand, cfg.projection_radius);
      if (cand.allFinite()) {
        State next = evaluate(std::move(cand));
        if (std::isfinite(next.value) && next.value <= cur.value) {
          cur = std::move(next);
          moved = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!moved) break;  // no step size in range decreases the objective
  }
  trace.theta_final = ParamVector(cur.theta);
  trace.wallclock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return trace;
}

/// alpha* = (1 / sigma^2) sqrt(dR / (T (B / sigma^2 + (1 - eta) |lambda| |Y|))).
inline double theoretical_step_size(double deltaR, long long T, double sigma, double B,
                                    double eta, double lambda_abs, int num_classes) {
  detail::require(deltaR > 0 && T > 0 && sigma > 0 && B > 0 && num_classes > 0,
                  ErrorKind::InvalidInput, "step size arguments must be positive");
  detail::require(std::isfinite(deltaR) && std::isfinite(sigma) && std::isfinite(B),
                  ErrorKind::InvalidInput, "step size arguments must be finite");
  detail::require(eta >= 0.0 && eta <= 1.0, ErrorKind::InvalidInput, "eta must lie in [0, 1]");
  detail::require(lambda_abs >= 0.0 && std::isfinite(lambda_abs), ErrorKind::InvalidInput,
                  "|lambda| must be finite and >= 0");
  const double s2 = sigma * sigma;
  const double denom =
      static_cast<double>(T) * (B / s2 + (1.0 - eta) * lambda_abs * num_classes);
  return std::sqrt(deltaR / denom) / s2;
}

struct SmoothnessConstants {
  double B = 0.0;
  double C = 0.0;
};

/// B = (L_tt + L_zt L_tz / (gamma - L_zz)) / 2 and C = L_zt L_tz / (gamma - L_zz).
inline SmoothnessConstants smoothness_constants(const Smoothness& s, double gamma) {
  detail::require(gamma > s.L_zz, ErrorKind::InvalidInput, "gamma must exceed L_zz");
  SmoothnessConstants out;
  out.C = std::isinf(gamma) ? 0.0 : s.L_ztheta * s.L_thetaz / (gamma - s.L_zz);
  out.B = 0.5 * (s.L_thetatheta + out.C);
  return out;
}

struct ConvexityOptions {
  double theta_radius = 1.0;
  Eigen::VectorXd theta_center;       // zero when empty
  std::optional<double> sigma;        // bound on ||grad_theta phi||; sampled when absent
  double fd_step = 1e-5;
};

struct ConvexityEstimate {
  /// -inf lambda_min / (sigma^2 (1 - 1/|Y|)); lambda >= threshold keeps the
  /// objective convex in theta.
  double threshold = 0.0;
  double min_eigenvalue = 0.0;
  double sigma = 0.0;

  bool safe(Lambda lambda) const { return lambda.value() >= 0.0 || lambda.value() >= threshold; }
};

/// Samples (z, theta) pairs, forms the theta-Hessian of phi_gamma by central
/// differences of its gradient, and plugs the smallest eigenvalue into the
/// convexity threshold for lambda.
template <DifferentiableLoss M>
ConvexityEstimate convexity_lambda_min(const M& model, const SemiDataset& data,
                                       const AttackConfig& ac, int probes, std::uint64_t seed,
                                       Eigen::Index param_count,
                                       const ConvexityOptions& opt = {}) {
  detail::require(probes >= 50, ErrorKind::InvalidInput, "need at least 50 probes");
  detail::require(data.size() > 0, ErrorKind::InvalidInput, "empty dataset");
  ac.validate();
  const Eigen::VectorXd center = opt.theta_center.size() == param_count
                                     ? opt.theta_center
                                     : Eigen::VectorXd::Zero(param_count);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> label(0, model.num_classes() - 1);

  auto phi_grad = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& x, int y) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(param_count);
    detail::labeled_term(model, th, x, y, ac, &g);
    return g;
  };

  double min_eig = kInf;
  double sigma = 0.0;
  for (int p = 0; p < probes; ++p) {
    const Example& z = data[pick(rng)];
    const int y = z.label ? *z.label : label(rng);
    const Eigen::VectorXd th = detail::sample_ball(rng, center, opt.theta_radius);
    sigma = std::max(sigma, phi_grad(th, z.features, y).norm());
    Eigen::MatrixXd H(param_count, param_count);
    for (Eigen::Index j = 0; j < param_count; ++j) {
      const double h = opt.fd_step * (1.0 + std::abs(th[j]));
      Eigen::VectorXd tp = th, tm = th;
      tp[j] += h;
      tm[j] -= h;
      H.col(j) = (phi_grad(tp, z.features, y) - phi_grad(tm, z.features, y)) / (tp[j] - tm[j]);
    }
    const Eigen::MatrixXd S = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  ConvexityEstimate out;
  out.min_eigenvalue = min_eig;
  out.sigma = opt.sigma.value_or(sigma);
  const double C = model.num_classes();
  if (out.sigma > 0.0) out.threshold = -min_eig / (out.sigma * out.sigma * (1.0 - 1.0 / C));
  if (out.threshold == 0.0) out.threshold = 0.0;  // drop the sign of -0
  return out;
}

}  // namespace ssdrl

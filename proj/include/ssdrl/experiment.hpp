#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ssdrl/adversary.hpp"
#include "ssdrl/data.hpp"
#include "ssdrl/error.hpp"
#include "ssdrl/models.hpp"
#include "ssdrl/svg.hpp"
#include "ssdrl/trainer.hpp"

namespace ssdrl {

struct ModelConfig {
  ModelKind kind = ModelKind::Logistic;
  std::vector<int> hidden;
  Activation activation = Activation::Tanh;

  ModelSpec spec(int input_dim, int num_classes) const {
    if (kind == ModelKind::Logistic) return ModelSpec::logistic(input_dim, num_classes);
    return ModelSpec::mlp(input_dim, hidden, num_classes, activation);
  }
};

struct EvalConfig {
  std::vector<double> eval_gammas;
  std::vector<double> pgm_eps;
  int eval_steps = 15;
  int pgm_T = 15;
  double kappa = 1.0;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ModelConfig model;
  std::vector<TrainConfig> train;
  EvalConfig attacks;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "ssdrl_out";
  int threads = 1;
  bool plots = true;
};

/// One CSV row: mode,gamma,lambda,seed,metric,value.
struct ResultRow {
  std::string mode;
  double gamma = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

struct Aggregate {
  std::string mode;
  double gamma = 0.0;
  double lambda = 0.0;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

struct ExperimentReport {
  std::vector<ResultRow> rows;
  std::vector<Aggregate> aggregates;
};

inline constexpr const char* kCsvHeader = "mode,gamma,lambda,seed,metric,value";

/// Shortest text that reads back as the same double; "inf" / "-inf" / "nan".
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline double json_number(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw Error(ErrorKind::FormatError, "'" + key + "' must be a number, \"inf\" or \"-inf\"");
}

inline void check_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::FormatError, where + " must be an object");
  for (const auto& [k, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw Error(ErrorKind::FormatError, "unknown key '" + k + "' in " + where);
}

inline std::vector<TrainConfig> parse_train(const nlohmann::json& t, int n, int n_labeled) {
  check_keys(t,
             {"mode", "gamma", "lambda", "alpha", "T", "k", "delta", "top_k",
              "projection_radius", "epsilon_report", "kappa", "ascent_steps", "grad_tol",
              "tie_break"},
             "train entry");
  TrainConfig c = TrainConfig::for_mode(parse_mode(t.value("mode", std::string("SSDRL"))));
  // DRL sees only the labeled points, so its default batch is capped there.
  c.k = std::min(32, c.mode == Mode::DRL ? n_labeled : n);
  if (t.contains("lambda")) c.lambda = Lambda(json_number(t["lambda"], "lambda"));
  if (t.contains("alpha")) c.alpha = t["alpha"].get<double>();
  if (t.contains("T")) c.T = t["T"].get<int>();
  if (t.contains("k")) c.k = t["k"].get<int>();
  if (t.contains("delta")) c.delta = t["delta"].get<double>();
  if (t.contains("top_k")) c.top_k = t["top_k"].get<int>();
  if (t.contains("projection_radius"))
    c.projection_radius = json_number(t["projection_radius"], "projection_radius");
  if (t.contains("epsilon_report")) c.epsilon_report = t["epsilon_report"].get<double>();
  if (t.contains("kappa")) c.kappa = t["kappa"].get<double>();
  if (t.contains("ascent_steps")) c.ascent_steps = t["ascent_steps"].get<int>();
  if (t.contains("grad_tol")) c.grad_tol = t["grad_tol"].get<double>();
  if (t.contains("tie_break")) {
    const auto s = t["tie_break"].get<std::string>();
    if (s != "lowest" && s != "random")
      throw Error(ErrorKind::FormatError, "tie_break must be 'lowest' or 'random'");
    c.tie_break = s == "random" ? TieBreak::Random : TieBreak::Lowest;
  }
  std::vector<double> gammas{c.gamma};
  if (t.contains("gamma")) {
    gammas.clear();
    if (t["gamma"].is_array()) {
      for (const auto& g : t["gamma"]) gammas.push_back(json_number(g, "gamma"));
    } else {
      gammas.push_back(json_number(t["gamma"], "gamma"));
    }
  }
  std::vector<TrainConfig> out;
  for (double g : gammas) {
    TrainConfig ci = c;
    ci.gamma = g;
    ci.validate();
    out.push_back(ci);
  }
  return out;
}

}  // namespace detail

/// Parses an experiment document. Unknown keys and malformed values raise
/// FormatError; inconsistent settings raise InvalidInput.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::check_keys;
  ExperimentConfig cfg;
  try {
    check_keys(j, {"dataset", "model", "train", "attacks", "seeds", "output_dir", "threads",
                   "plots"},
               "config");
    const auto& d = j.at("dataset");
    check_keys(d,
               {"kind", "n", "eta", "noise", "seed", "n_test", "separation", "dim",
                "mnist_images", "mnist_labels", "mnist_test_images", "mnist_test_labels"},
               "dataset");
    auto& ds = cfg.dataset;
    ds.kind = parse_dataset_kind(d.value("kind", std::string("two-gaussians")));
    ds.n = d.value("n", ds.n);
    ds.eta = d.value("eta", ds.eta);
    ds.noise = d.value("noise", ds.noise);
    ds.seed = d.value("seed", ds.seed);
    ds.n_test = d.value("n_test", ds.n_test);
    ds.separation = d.value("separation", ds.separation);
    ds.dim = d.value("dim", ds.dim);
    ds.mnist_images = d.value("mnist_images", std::string());
    ds.mnist_labels = d.value("mnist_labels", std::string());
    ds.mnist_test_images = d.value("mnist_test_images", std::string());
    ds.mnist_test_labels = d.value("mnist_test_labels", std::string());
    ds.validate();

    if (j.contains("model")) {
      const auto& m = j["model"];
      check_keys(m, {"kind", "hidden", "activation"}, "model");
      const auto kind = m.value("kind", std::string("logistic"));
      if (kind == "logistic") {
        cfg.model.kind = ModelKind::Logistic;
      } else if (kind == "mlp") {
        cfg.model.kind = ModelKind::Mlp;
        cfg.model.hidden = m.value("hidden", std::vector<int>{32});
      } else {
        throw Error(ErrorKind::FormatError, "model kind must be 'logistic' or 'mlp'");
      }
      const auto act = m.value("activation", std::string("tanh"));
      if (act != "tanh" && act != "softplus")
        throw Error(ErrorKind::FormatError, "activation must be 'tanh' or 'softplus'");
      cfg.model.activation = act == "tanh" ? Activation::Tanh : Activation::Softplus;
    }

    const auto& tr = j.at("train");
    if (!tr.is_array() || tr.empty())
      throw Error(ErrorKind::FormatError, "'train' must be a non-empty list");
    for (const auto& t : tr)
      for (auto& c : detail::parse_train(t, ds.n, ds.labeled_count())) cfg.train.push_back(c);

    if (j.contains("attacks")) {
      const auto& a = j["attacks"];
      check_keys(a, {"eval_gammas", "pgm_eps", "eval_steps", "pgm_T", "kappa"}, "attacks");
      if (a.contains("eval_gammas"))
        for (const auto& g : a["eval_gammas"])
          cfg.attacks.eval_gammas.push_back(detail::json_number(g, "eval_gammas"));
      cfg.attacks.pgm_eps = a.value("pgm_eps", std::vector<double>{});
      cfg.attacks.eval_steps = a.value("eval_steps", 15);
      cfg.attacks.pgm_T = a.value("pgm_T", 15);
      cfg.attacks.kappa = a.value("kappa", 1.0);
      for (double g : cfg.attacks.eval_gammas)
        AttackConfig{g, cfg.attacks.kappa, cfg.attacks.eval_steps, 0.0}.validate();
      for (double e : cfg.attacks.pgm_eps)
        detail::require(e >= 0.0, ErrorKind::InvalidInput, "pgm_eps must be >= 0");
      detail::require(cfg.attacks.pgm_T >= 2, ErrorKind::InvalidInput, "pgm_T must be >= 2");
    }
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw Error(ErrorKind::FormatError, "'seeds' must not be empty");
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.threads = std::max(1, j.value("threads", 1));
    cfg.plots = j.value("plots", true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, e.what());
  }
  return parse_config(j);
}

/// Dataset used for a given run seed.
inline GeneratedData dataset_for_seed(const DatasetSpec& spec, std::uint64_t seed) {
  DatasetSpec s = spec;
  s.seed = spec.seed + 1000003ULL * seed;
  return generate_dataset(s);
}

/// Trains one cell: hard-label modes use hard_label_train, the others SGD.
template <DifferentiableLoss M>
TrainTrace train_cell(const M& model, const Eigen::VectorXd& theta0, const SemiDataset& data,
                      TrainConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  if (cfg.mode == Mode::HardMin || cfg.mode == Mode::HardMax)
    return hard_label_train(model, theta0, data, cfg);
  return sgd_train(model, theta0, data, cfg);
}

/// Clean, inner-max-attacked and PGM-attacked metrics of theta on a test set.
inline std::vector<std::pair<std::string, double>> evaluate_model(
    const Classifier& model, const Eigen::VectorXd& theta, const std::vector<Example>& test,
    const EvalConfig& ev) {
  std::vector<std::pair<std::string, double>> out;
  const auto n = static_cast<double>(test.size());
  int wrong = 0;
  for (const auto& z : test) wrong += model.predict(theta, z.features) != *z.label;
  out.emplace_back("clean_error", wrong / n);
  for (double g : ev.eval_gammas) {
    const AttackConfig ac{g, ev.kappa, ev.eval_steps, 0.0};
    int bad = 0;
    double total = 0.0;
    for (const auto& z : test) {
      const AttackResult r = solve_inner_max(model, theta, z, ac);
      total += r.objective;
      bad += model.predict(theta, r.z_star.features) != *z.label;
    }
    out.emplace_back("adv_error@gamma=" + format_number(g), bad / n);
    out.emplace_back("adv_loss@gamma=" + format_number(g), total / n);
  }
  for (double e : ev.pgm_eps) {
    int bad = 0;
    for (const auto& z : test)
      bad += model.predict(theta, pgm_attack(model, theta, z, e, ev.pgm_T).features) != *z.label;
    out.emplace_back("pgm_error@eps=" + format_number(e), bad / n);
  }
  return out;
}

struct CellOutcome {
  TrainConfig cfg;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string error;
  TrainTrace trace;
  Eigen::VectorXd theta;
  std::vector<std::pair<std::string, double>> metrics;
};

inline CellOutcome make_cell(const TrainConfig& cfg, std::uint64_t seed) {
  CellOutcome c;
  c.cfg = cfg;
  c.seed = seed;
  return c;
}

inline std::string cell_name(const TrainConfig& c, std::uint64_t seed) {
  std::string s = to_string(c.mode) + "_g" + format_number(c.gamma) + "_l" +
                  format_number(detail::effective_lambda(c).value()) + "_s" +
                  std::to_string(seed);
  for (char& ch : s)
    if (ch == '.') ch = 'p';
  return s;
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "failed writing '" + p.string() + "'");
}

inline std::string csv_rows(const std::vector<ResultRow>& rows) {
  std::ostringstream o;
  o << kCsvHeader << "\n";
  for (const auto& r : rows)
    o << r.mode << "," << format_number(r.gamma) << "," << format_number(r.lambda) << ","
      << r.seed << "," << r.metric << "," << format_number(r.value) << "\n";
  return o.str();
}

inline std::vector<Aggregate> aggregate(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, double, double, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : rows) {
    Key k{r.mode, r.gamma, r.lambda, r.metric};
    if (!groups.count(k)) order.push_back(k);
    groups[k].push_back(r.value);
  }
  std::vector<Aggregate> out;
  for (const auto& k : order) {
    const auto& v = groups[k];
    Aggregate a{std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k)};
    a.count = static_cast<int>(v.size());
    for (double x : v) a.mean += x;
    a.mean /= a.count;
    if (a.count > 1) {
      for (double x : v) a.stddev += (x - a.mean) * (x - a.mean);
      a.stddev = std::sqrt(a.stddev / (a.count - 1));
    }
    out.push_back(a);
  }
  return out;
}

inline std::string summary_csv(const std::vector<Aggregate>& agg) {
  std::ostringstream o;
  o << "mode,gamma,lambda,metric,mean,stddev,count\n";
  for (const auto& a : agg)
    o << a.mode << "," << format_number(a.gamma) << "," << format_number(a.lambda) << ","
      << a.metric << "," << format_number(a.mean) << "," << format_number(a.stddev) << ","
      << a.count << "\n";
  return o.str();
}

inline std::string trace_csv(const TrainTrace& t) {
  std::ostringstream o;
  o << "iteration,risk,gradnorm\n";
  for (std::size_t i = 0; i < t.risk_history.size(); ++i)
    o << i << "," << format_number(t.risk_history[i]) << ","
      << format_number(t.gradnorm_history[i]) << "\n";
  return o.str();
}

/// Error curves over a grid of attack strengths, one series per trained cell.
inline std::vector<Series> curves(const std::vector<Aggregate>& agg, const std::string& prefix,
                                  bool invert) {
  std::map<std::string, Series> by;
  std::vector<std::string> order;
  for (const auto& a : agg) {
    if (a.metric.rfind(prefix, 0) != 0) continue;
    const double v = std::strtod(a.metric.c_str() + prefix.size(), nullptr);
    const std::string name =
        a.mode + " g=" + format_number(a.gamma) + " l=" + format_number(a.lambda);
    if (!by.count(name)) {
      order.push_back(name);
      by[name].name = name;
    }
    by[name].x.push_back(invert ? 1.0 / v : v);
    by[name].y.push_back(a.mean);
  }
  std::vector<Series> out;
  for (const auto& n : order) {
    Series s = by[n];
    std::vector<std::size_t> idx(s.x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.x[a] < s.x[b]; });
    Series sorted{s.name, {}, {}};
    for (auto i : idx) {
      sorted.x.push_back(s.x[i]);
      sorted.y.push_back(s.y[i]);
    }
    out.push_back(std::move(sorted));
  }
  return out;
}

}  // namespace detail

/// Resolved output directory: SSDRL_OUTPUT_DIR wins over the config value.
inline std::string output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("SSDRL_OUTPUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return cfg.output_dir;
}

/// Trains every (train entry, seed) cell. Cells run in parallel on
/// cfg.threads workers; outcomes come back in (entry, seed) order.
inline std::vector<CellOutcome> train_all(const ExperimentConfig& cfg, bool evaluate) {
  std::vector<GeneratedData> data;
  for (auto s : cfg.seeds) data.push_back(dataset_for_seed(cfg.dataset, s));
  std::vector<CellOutcome> cells;
  for (const auto& t : cfg.train)
    for (auto s : cfg.seeds) cells.push_back(make_cell(t, s));
  detail::parallel_for(cells.size(), cfg.threads, [&](std::size_t c) {
    auto& cell = cells[c];
    const std::size_t si = c % cfg.seeds.size();
    const auto& d = data[si];
    const Classifier model(cfg.model.spec(d.input_dim, d.num_classes));
    const Eigen::VectorXd theta0 = model.init_params(cell.seed);
    try {
      cell.trace = train_cell(model, theta0, d.train, cell.cfg, cell.seed);
      cell.theta = cell.trace.theta_final.values();
    } catch (const TrainingDiverged& e) {
      cell.diverged = true;
      cell.error = e.what();
      cell.trace = e.trace();
      return;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DivergedAttack) throw;
      cell.diverged = true;
      cell.error = e.what();
      return;
    }
    if (evaluate) cell.metrics = evaluate_model(model, cell.theta, d.test, cfg.attacks);
  });
  return cells;
}

inline std::vector<ResultRow> result_rows(const std::vector<CellOutcome>& cells) {
  std::vector<ResultRow> rows;
  for (const auto& c : cells) {
    const std::string mode = to_string(c.cfg.mode);
    const double lam = detail::effective_lambda(c.cfg).value();
    auto add = [&](const std::string& m, double v) {
      rows.push_back(ResultRow{mode, c.cfg.gamma, lam, c.seed, m, v});
    };
    add("diverged", c.diverged ? 1.0 : 0.0);
    if (c.diverged) continue;
    add("final_risk", c.trace.risk_history.empty() ? std::nan("") : c.trace.risk_history.back());
    add("iterations", static_cast<double>(c.trace.risk_history.size()));
    for (const auto& [m, v] : c.metrics) add(m, v);
  }
  return rows;
}

inline void write_params(const std::filesystem::path& p, const CellOutcome& c) {
  nlohmann::json j;
  j["mode"] = to_string(c.cfg.mode);
  j["gamma"] = format_number(c.cfg.gamma);
  j["lambda"] = format_number(detail::effective_lambda(c.cfg).value());
  j["seed"] = c.seed;
  j["theta"] = std::vector<double>(c.theta.data(), c.theta.data() + c.theta.size());
  detail::write_text(p, j.dump() + "\n");
}

inline Eigen::VectorXd read_params(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + p.string() + "'");
  try {
    nlohmann::json j;
    in >> j;
    const auto v = j.at("theta").get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, e.what());
  }
}

/// Writes traces/ and params/ for every cell.
inline void write_training_artifacts(const std::filesystem::path& dir,
                                     const std::vector<CellOutcome>& cells) {
  std::filesystem::create_directories(dir / "traces");
  std::filesystem::create_directories(dir / "params");
  for (const auto& c : cells) {
    const auto name = cell_name(c.cfg, c.seed);
    detail::write_text(dir / "traces" / (name + ".csv"), detail::trace_csv(c.trace));
    if (!c.diverged) write_params(dir / "params" / (name + ".json"), c);
  }
}

inline void write_results(const std::filesystem::path& dir, const ExperimentReport& rep,
                          bool plots) {
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "results.csv", detail::csv_rows(rep.rows));
  detail::write_text(dir / "summary.csv", detail::summary_csv(rep.aggregates));
  if (!plots) return;
  const auto g = detail::curves(rep.aggregates, "adv_error@gamma=", true);
  if (!g.empty())
    detail::write_text(dir / "error_vs_inv_gamma.svg",
                       line_chart_svg("Adversarial error vs 1/gamma", "1/gamma_eval",
                                      "error rate", g));
  const auto e = detail::curves(rep.aggregates, "pgm_error@eps=", false);
  if (!e.empty())
    detail::write_text(dir / "error_vs_pgm_eps.svg",
                       line_chart_svg("PGM error vs epsilon", "epsilon", "error rate", e));
}

/// Full pipeline: train every cell, evaluate against the final parameters and
/// write results.csv, summary.csv, traces, params and plots.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, bool write = true) {
  const auto cells = train_all(cfg, true);
  ExperimentReport rep;
  rep.rows = result_rows(cells);
  rep.aggregates = detail::aggregate(rep.rows);
  if (write) {
    const std::filesystem::path dir = output_dir(cfg);
    write_training_artifacts(dir, cells);
    write_results(dir, rep, cfg.plots);
  }
  return rep;
}

/// Evaluates parameters previously written by the train step.
inline ExperimentReport evaluate_saved(const ExperimentConfig& cfg,
                                       const std::filesystem::path& params_dir) {
  std::vector<GeneratedData> data;
  for (auto s : cfg.seeds) data.push_back(dataset_for_seed(cfg.dataset, s));
  std::vector<CellOutcome> cells;
  for (const auto& t : cfg.train)
    for (auto s : cfg.seeds) cells.push_back(make_cell(t, s));
  detail::parallel_for(cells.size(), cfg.threads, [&](std::size_t c) {
    auto& cell = cells[c];
    const auto& d = data[c % cfg.seeds.size()];
    const Classifier model(cfg.model.spec(d.input_dim, d.num_classes));
    const auto p = params_dir / (cell_name(cell.cfg, cell.seed) + ".json");
    if (!std::filesystem::exists(p)) {
      cell.diverged = true;
      return;
    }
    cell.theta = read_params(p);
    detail::require(cell.theta.size() == model.param_count(), ErrorKind::ShapeError,
                    "saved parameters do not fit the model in the config");
    cell.trace.risk_history.push_back(std::nan(""));
    cell.metrics = evaluate_model(model, cell.theta, d.test, cfg.attacks);
  });
  ExperimentReport rep;
  for (auto& r : result_rows(cells))
    if (r.metric != "final_risk" && r.metric != "iterations") rep.rows.push_back(r);
  rep.aggregates = detail::aggregate(rep.rows);
  return rep;
}

}  // namespace ssdrl

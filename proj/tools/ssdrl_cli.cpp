// Command-line front end: gen, train, attack, report, theory.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssdrl/ssdrl.hpp"

namespace fs = std::filesystem;
using namespace ssdrl;

namespace {

// --output beats SSDRL_OUTPUT_DIR, which beats the config.
fs::path resolve_output(const ExperimentConfig& cfg, const std::string& flag) {
  return flag.empty() ? fs::path(output_dir(cfg)) : fs::path(flag);
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + p.string() + "'");
  out << text;
}

std::string examples_csv(const std::vector<Example>& ex, const std::vector<bool>& labeled) {
  std::ostringstream o;
  const auto d = ex.empty() ? 0 : ex.front().features.size();
  for (Eigen::Index j = 0; j < d; ++j) o << "x" << j << ",";
  o << "label,labeled\n";
  for (std::size_t i = 0; i < ex.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) o << format_number(ex[i].features[j]) << ",";
    o << (ex[i].label ? std::to_string(*ex[i].label) : std::string()) << ","
      << (labeled[i] ? 1 : 0) << "\n";
  }
  return o.str();
}

int cmd_gen(const ExperimentConfig& cfg, const fs::path& dir) {
  for (auto seed : cfg.seeds) {
    const auto d = dataset_for_seed(cfg.dataset, seed);
    const auto& tr = d.train;
    // Unlabeled rows carry their hidden label so the file is a complete record.
    std::vector<Example> rows;
    std::vector<bool> flag(tr.size(), false);
    for (std::size_t i = 0; i < tr.size(); ++i)
      rows.push_back(Example{tr[i].features, tr[i].label ? tr[i].label : tr.hidden_labels()[i]});
    for (auto i : tr.labeled()) flag[i] = true;
    const std::string s = "_s" + std::to_string(seed);
    write_file(dir / ("train" + s + ".csv"), examples_csv(rows, flag));
    write_file(dir / ("test" + s + ".csv"),
               examples_csv(d.test, std::vector<bool>(d.test.size(), true)));
  }
  std::printf("wrote %zu dataset(s) to %s\n", cfg.seeds.size(), dir.string().c_str());
  return 0;
}

void print_cells(const std::vector<CellOutcome>& cells) {
  for (const auto& c : cells)
    std::printf("%-28s %s\n", cell_name(c.cfg, c.seed).c_str(),
                c.diverged ? ("diverged: " + c.error).c_str() : "ok");
}

int cmd_train(const ExperimentConfig& cfg, const fs::path& dir) {
  const auto cells = train_all(cfg, false);
  write_training_artifacts(dir, cells);
  print_cells(cells);
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const fs::path& dir, const std::string& params) {
  const fs::path p = params.empty() ? dir / "params" : fs::path(params);
  const auto rep = evaluate_saved(cfg, p);
  write_results(dir, rep, cfg.plots);
  std::printf("wrote %zu rows to %s\n", rep.rows.size(), (dir / "results.csv").string().c_str());
  return 0;
}

int cmd_report(const ExperimentConfig& cfg, const fs::path& dir) {
  const auto cells = train_all(cfg, true);
  ExperimentReport rep;
  rep.rows = result_rows(cells);
  rep.aggregates = detail::aggregate(rep.rows);
  write_training_artifacts(dir, cells);
  write_results(dir, rep, cfg.plots);
  print_cells(cells);
  for (const auto& a : rep.aggregates)
    if (a.metric == "clean_error")
      std::printf("%-8s gamma=%-6s lambda=%-5s clean_error %.4f +- %.4f (%d seeds)\n",
                  a.mode.c_str(), format_number(a.gamma).c_str(),
                  format_number(a.lambda).c_str(), a.mean, a.stddev, a.count);
  return 0;
}

struct TheoryArgs {
  std::string instance;
  std::uint64_t seed = 1;
  int num_x = 4, num_y = 2, num_functions = 4;
  std::vector<double> lambdas{-10, -1, 0, 1, 10};
  std::vector<double> zetas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> eps{0.0, 0.1, 1.0};
  double eta = 0.5;
  int n = 64, rounds = 500;
};

int cmd_theory(const TheoryArgs& a, const fs::path& dir) {
  FiniteInstance inst;
  if (!a.instance.empty()) {
    std::ifstream in(a.instance);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + a.instance + "'");
    try {
      inst = nlohmann::json::parse(in).get<FiniteInstance>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::FormatError, e.what());
    }
    inst.validate();
  } else {
    inst = random_instance(a.seed, a.num_x, a.num_y, a.num_functions);
  }
  std::ostringstream o;
  o << "quantity,function,lambda,zeta,value\n";
  auto row = [&](const char* q, int f, double lam, double zeta, double v) {
    o << q << "," << f << "," << format_number(lam) << "," << format_number(zeta) << ","
      << format_number(v) << "\n";
  };
  const double nan = std::nan("");
  for (int f = 0; f < inst.num_functions(); ++f) {
    row("expected_phi", f, nan, nan, expected_phi(inst, f));
    row("lambda_threshold", f, nan, nan, lambda_threshold(inst, f));
    for (double l : a.lambdas) row("rho", f, l, nan, rho_lambda(inst, f, Lambda(l)));
    row("rho", f, kInf, nan, rho_lambda(inst, f, Lambda::pos_inf()));
  }
  for (double l : a.lambdas)
    for (double z : a.zetas) row("msr", -1, l, z, msr(inst, Lambda(l), z));
  for (double e : a.eps) {
    const auto s = ssm_rademacher(inst, inst.phi, e, a.eta, a.n, a.rounds, a.seed);
    row("ssm_mean", -1, nan, e, s.mean);
    row("ssm_stderr", -1, nan, e, s.stderr_);
  }
  write_file(dir / "theory.csv", o.str());
  write_file(dir / "instance.json", nlohmann::json(inst).dump(2) + "\n");
  std::printf("best function %d; wrote %s\n", best_function(inst),
              (dir / "theory.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised distributionally robust learning toolkit"};
  app.require_subcommand(1);
  std::string config, output, params;
  auto with_config = [&](CLI::App* s) {
    s->add_option("-c,--config", config, "experiment JSON")->required();
    s->add_option("-o,--output", output, "output directory (overrides SSDRL_OUTPUT_DIR)");
  };
  auto* gen = app.add_subcommand("gen", "write the configured datasets as CSV");
  auto* train = app.add_subcommand("train", "train every cell; write traces and params");
  auto* attack = app.add_subcommand("attack", "evaluate saved params; write results.csv");
  auto* report = app.add_subcommand("report", "train, evaluate and write all artifacts");
  for (auto* s : {gen, train, attack, report}) with_config(s);
  attack->add_option("--params", params, "params directory (default <output>/params)");

  TheoryArgs ta;
  auto* theory = app.add_subcommand("theory", "finite-instance quantities");
  theory->add_option("--instance", ta.instance, "instance JSON");
  theory->add_option("--random-seed", ta.seed, "seed for a random instance and Monte Carlo");
  theory->add_option("--num-x", ta.num_x);
  theory->add_option("--num-y", ta.num_y);
  theory->add_option("--num-functions", ta.num_functions);
  theory->add_option("--lambdas", ta.lambdas)->delimiter(',');
  theory->add_option("--zetas", ta.zetas)->delimiter(',');
  theory->add_option("--eps", ta.eps, "SSM transport budgets")->delimiter(',');
  theory->add_option("--eta", ta.eta);
  theory->add_option("--n", ta.n);
  theory->add_option("--rounds", ta.rounds);
  theory->add_option("-o,--output", output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (theory->parsed()) return cmd_theory(ta, output);
    const ExperimentConfig cfg = load_config(config);
    const fs::path dir = resolve_output(cfg, output);
    if (gen->parsed()) return cmd_gen(cfg, dir);
    if (train->parsed()) return cmd_train(cfg, dir);
    if (attack->parsed()) return cmd_attack(cfg, dir, params);
    return cmd_report(cfg, dir);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::FormatError ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

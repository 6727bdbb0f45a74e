// Trains a logistic model with SSDRL on a small two-gaussians problem and
// prints clean and adversarial test error.
#include <cstdio>

#include "ssdrl/ssdrl.hpp"

int main() {
  using namespace ssdrl;
  DatasetSpec spec;
  spec.n = 300;
  spec.eta = 0.1;
  spec.noise = 1.0;
  spec.seed = 3;
  const GeneratedData data = generate_dataset(spec);
  const Classifier model(ModelSpec::logistic(data.input_dim, data.num_classes));

  TrainConfig cfg = TrainConfig::for_mode(Mode::SSDRL);
  cfg.gamma = 1.0;
  cfg.lambda = Lambda(-1.0);
  cfg.alpha = 0.2;
  cfg.T = 500;
  cfg.k = 32;
  const TrainTrace trace = sgd_train(model, model.init_params(0), data.train, cfg);

  EvalConfig ev;
  ev.eval_gammas = {0.5, 2.0};
  ev.pgm_eps = {0.5};
  for (const auto& [metric, value] :
       evaluate_model(model, trace.theta_final.values(), data.test, ev))
    std::printf("%-22s %.4f\n", metric.c_str(), value);
  std::printf("final risk %.5f after %zu steps\n", trace.risk_history.back(),
              trace.risk_history.size());
}

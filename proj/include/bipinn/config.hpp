#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bipinn/problems.hpp"
#include "bipinn/trainer.hpp"

// Flattened run configuration: one JSON object holding the problem, the
// architecture, and every training knob. Defaults are the reference
// hyperparameters (21 units per hidden layer, lr 0.002, A = 2, swaps every
// 200 epochs, prune at 1e-3, three-phase lambda 0.001/0.01/0.001). Unknown
// keys are rejected.

namespace bipinn {

struct RunConfig {
  // problem
  std::string problem = "poisson_harmonic";  // or "logistic"
  std::vector<double> coefficients = {1.0, 4.0, 9.0, 16.0};
  double logistic_rate = 1.0;
  double logistic_x0 = 0.5;
  double t_hi = 5.0;  // logistic only; the Poisson domain is fixed [0, 2*pi]
  // architecture
  std::vector<int> layer_sizes = {1, 21, 1};
  std::string activation = "sinlu";
  bool final_activation = false;
  double A = 2.0;
  // collocation
  int n_interior = 1000;
  int n_boundary = 50;
  int n_test = 100;
  // training
  long epochs = 100000;
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  bool bimt_enabled = true;
  double lambda_phase1 = 0.001;
  double lambda_phase2 = 0.01;
  double lambda_phase3 = 0.001;
  bool bias_penalty_in_phase3 = true;
  bool weight_penalty_in_phase3 = true;
  long swap_interval = 200;
  double prune_threshold = 1e-3;
  long snapshot_every = 0;
  long metrics_every = 100;
  int threads = 1;

  ProblemSpec problem_spec() const {
    if (problem == "poisson_harmonic") return ProblemSpec::poisson(coefficients);
    if (problem == "logistic") return ProblemSpec::logistic(logistic_rate, logistic_x0, t_hi);
    throw std::invalid_argument("unknown problem: " + problem);
  }

  Architecture architecture() const {
    Architecture a;
    a.layer_sizes = layer_sizes;
    a.activation = activation_from_string(activation);
    a.final_activation = final_activation;
    a.geometry_scale = A;
    return a;
  }

  TrainConfig train_config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.learning_rate = learning_rate;
    c.adam = AdamHyper{beta1, beta2, epsilon, weight_decay};
    c.seed = seed;
    c.bimt_enabled = bimt_enabled;
    c.schedule.lambda_phase1 = lambda_phase1;
    c.schedule.lambda_phase2 = lambda_phase2;
    c.schedule.lambda_phase3 = lambda_phase3;
    c.schedule.bias_penalty_in_phase3 = bias_penalty_in_phase3;
    c.schedule.weight_penalty_in_phase3 = weight_penalty_in_phase3;
    c.reg.locality_scale = A;
    c.reg.swap_interval = swap_interval;
    c.prune_threshold = prune_threshold;
    c.snapshot_every = snapshot_every;
    c.metrics_every = metrics_every;
    c.threads = threads;
    c.n_interior = n_interior;
    c.n_boundary = n_boundary;
    c.n_test = n_test;
    return c;
  }
};

inline nlohmann::json config_to_json(const RunConfig& c) {
  return nlohmann::json{{"problem", c.problem},
                        {"coefficients", c.coefficients},
                        {"logistic_rate", c.logistic_rate},
                        {"logistic_x0", c.logistic_x0},
                        {"t_hi", c.t_hi},
                        {"layer_sizes", c.layer_sizes},
                        {"activation", c.activation},
                        {"final_activation", c.final_activation},
                        {"A", c.A},
                        {"n_interior", c.n_interior},
                        {"n_boundary", c.n_boundary},
                        {"n_test", c.n_test},
                        {"epochs", c.epochs},
                        {"learning_rate", c.learning_rate},
                        {"beta1", c.beta1},
                        {"beta2", c.beta2},
                        {"epsilon", c.epsilon},
                        {"weight_decay", c.weight_decay},
                        {"seed", c.seed},
                        {"bimt_enabled", c.bimt_enabled},
                        {"lambda_phase1", c.lambda_phase1},
                        {"lambda_phase2", c.lambda_phase2},
                        {"lambda_phase3", c.lambda_phase3},
                        {"bias_penalty_in_phase3", c.bias_penalty_in_phase3},
                        {"weight_penalty_in_phase3", c.weight_penalty_in_phase3},
                        {"swap_interval", c.swap_interval},
                        {"prune_threshold", c.prune_threshold},
                        {"snapshot_every", c.snapshot_every},
                        {"metrics_every", c.metrics_every},
                        {"threads", c.threads}};
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  static const std::set<std::string> known = [] {
    std::set<std::string> k;
    const nlohmann::json defaults = config_to_json(RunConfig{});
    for (const auto& [key, _] : defaults.items()) k.insert(key);
    return k;
  }();
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw std::invalid_argument("unknown config key: " + key);

  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("problem", c.problem);
  get("coefficients", c.coefficients);
  get("logistic_rate", c.logistic_rate);
  get("logistic_x0", c.logistic_x0);
  get("t_hi", c.t_hi);
  get("layer_sizes", c.layer_sizes);
  get("activation", c.activation);
  get("final_activation", c.final_activation);
  get("A", c.A);
  get("n_interior", c.n_interior);
  get("n_boundary", c.n_boundary);
  get("n_test", c.n_test);
  get("epochs", c.epochs);
  get("learning_rate", c.learning_rate);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("epsilon", c.epsilon);
  get("weight_decay", c.weight_decay);
  get("seed", c.seed);
  get("bimt_enabled", c.bimt_enabled);
  get("lambda_phase1", c.lambda_phase1);
  get("lambda_phase2", c.lambda_phase2);
  get("lambda_phase3", c.lambda_phase3);
  get("bias_penalty_in_phase3", c.bias_penalty_in_phase3);
  get("weight_penalty_in_phase3", c.weight_penalty_in_phase3);
  get("swap_interval", c.swap_interval);
  get("prune_threshold", c.prune_threshold);
  get("snapshot_every", c.snapshot_every);
  get("metrics_every", c.metrics_every);
  get("threads", c.threads);
  return c;
}

// Applies one "key=value" override; the value is parsed as JSON, falling back
// to a raw string.
inline void apply_override(nlohmann::json& j, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like key=value: " + kv);
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  j[key] = value;
}

}  // namespace bipinn

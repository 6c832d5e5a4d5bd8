#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "bipinn/trainer.hpp"
#include "support/finite_diff.hpp"

using namespace bipinn;
using testsupport::close;

TEST_CASE("adamw first step") {
  // w=1, g=1, lr=0.002, wd=0: bias-corrected mhat=1, vhat=1, so
  // w <- 1 - 0.002 * 1/(1 + 1e-8)
  OptimizerState st;
  std::vector<double> params{1.0};
  std::vector<double> grads{1.0};
  adamw_step(st, params, grads, AdamHyper{}, 0.002);
  CHECK(params[0] == Approx(1.0 - 0.002 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(st.step == 1);
}

TEST_CASE("adamw zero gradient leaves parameters unchanged") {
  OptimizerState st;
  std::vector<double> params{0.5, -1.25, 3.0};
  const std::vector<double> before = params;
  std::vector<double> grads{0.0, 0.0, 0.0};
  for (int i = 0; i < 10; ++i) adamw_step(st, params, grads, AdamHyper{}, 0.002);
  CHECK(params == before);
}

TEST_CASE("adamw weight decay decouples") {
  // with zero gradient, decay shrinks the parameter geometrically
  OptimizerState st;
  std::vector<double> params{2.0};
  std::vector<double> grads{0.0};
  AdamHyper h;
  h.weight_decay = 0.1;
  adamw_step(st, params, grads, h, 0.01);
  CHECK(params[0] == Approx(2.0 * (1.0 - 0.01 * 0.1)).epsilon(1e-12));
}

namespace {

TrainConfig small_config(long epochs, bool bimt, std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.bimt_enabled = bimt;
  cfg.seed = seed;
  cfg.n_interior = 64;
  cfg.n_boundary = 8;
  cfg.n_test = 100;
  cfg.metrics_every = 50;
  cfg.reg.swap_interval = 25;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_CASE("pinn loss on the zero network") {
  // u == 0 on c=(1,0,0,0): pde term = mean sin^2(t) ~ 0.5, bc terms = 0
  Architecture a{{1, 8, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 4);
  for (auto& w : net.weights)
    for (double& v : w.a) v = 0.0;
  for (auto& b : net.biases)
    for (double& v : b) v = 0.0;

  const ProblemSpec spec = ProblemSpec::poisson({1.0});
  const CollocationSet colloc = sample_collocation(spec, 1000, 50, 100, 8);

  Tape tape;
  LossBreakdown bd;
  Scalar loss = pinn_loss(net, tape, spec, colloc, nullptr, &bd);
  CHECK(loss.value() >= 0.0);
  CHECK(bd.pde == Approx(0.5).margin(0.05));  // sampling noise
  CHECK(bd.bc[0] == 0.0);
  CHECK(bd.bc[1] == 0.0);
  CHECK(loss.value() == Approx(bd.total()).epsilon(1e-12));

  // against the independent plain-double evaluation
  CHECK(loss.value() == Approx(pinn_loss_value(net, spec, colloc)).epsilon(1e-12));
}

TEST_CASE("engine gradients equal single-tape gradients") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 4; ++trial) {
    Architecture a{trial % 2 == 0 ? std::vector<int>{1, 6, 1} : std::vector<int>{1, 5, 3, 1},
                   Activation::SinLU, false, 2.0};
    GeometricNetwork net = init_xavier(a, 50 + trial);
    const ProblemSpec spec =
        trial < 2 ? ProblemSpec::poisson({1.0, 4.0}) : ProblemSpec::logistic();
    const CollocationSet colloc = sample_collocation(spec, 20, trial < 2 ? 4 : 3, 10, trial);

    // route 1: single tape over the composite loss
    Tape tape;
    std::vector<Scalar> vars;
    Scalar loss = pinn_loss(net, tape, spec, colloc, &vars);
    Gradients g = tape.backward(loss);

    // route 2: per-point engine with deterministic reduction
    LossEngine<GeometricNetwork> engine(net, spec, colloc, 1);
    std::vector<double> flat, grads;
    gather_params(net, flat);
    LossBreakdown bd;
    engine.evaluate(net, flat, grads, bd);

    CHECK(bd.total() == Approx(loss.value()).epsilon(1e-12));
    REQUIRE(grads.size() == vars.size());
    for (std::size_t j = 0; j < vars.size(); ++j)
      CHECK(close(grads[j], g.at(vars[j]), 1e-11, 1e-13));
  }
}

TEST_CASE("engine is thread-count invariant") {
  Architecture a{{1, 7, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 3);
  const ProblemSpec spec = ProblemSpec::poisson({1.0});
  const CollocationSet colloc = sample_collocation(spec, 100, 10, 10, 1);

  std::vector<double> flat;
  gather_params(net, flat);
  std::vector<double> g1, g4;
  LossBreakdown b1, b4;
  LossEngine<GeometricNetwork> e1(net, spec, colloc, 1);
  LossEngine<GeometricNetwork> e4(net, spec, colloc, 4);
  e1.evaluate(net, flat, g1, b1);
  e4.evaluate(net, flat, g4, b4);
  CHECK(g1 == g4);  // bit-identical
  CHECK(b1.pde == b4.pde);
}

TEST_CASE("loss gradients match finite differences") {
  Architecture a{{1, 4, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 33);
  const ProblemSpec spec = ProblemSpec::poisson({1.0, 4.0});
  const CollocationSet colloc = sample_collocation(spec, 12, 4, 10, 2);

  LossEngine<GeometricNetwork> engine(net, spec, colloc, 1);
  std::vector<double> flat, grads;
  gather_params(net, flat);
  LossBreakdown bd;
  engine.evaluate(net, flat, grads, bd);

  for (std::size_t j = 0; j < flat.size(); ++j) {
    auto f = [&](double v) {
      GeometricNetwork perturbed = net;
      std::vector<double> p = flat;
      p[j] = v;
      scatter_params(perturbed, p);
      return pinn_loss_value(perturbed, spec, colloc);
    };
    const double fd = testsupport::fd_first(f, flat[j]);
    CHECK(close(grads[j], fd, 1e-6, 1e-9));
  }
}

TEST_CASE("plain baseline has identically zero reg loss") {
  Architecture a{{1, 6, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 5);
  RunRecord rec = train(net, ProblemSpec::poisson({1.0}), small_config(120, false));
  REQUIRE(!rec.metrics.empty());
  for (const auto& row : rec.metrics) {
    CHECK(row.reg_loss == 0.0);
    CHECK(row.swaps_made == 0);
  }
}

TEST_CASE("training reduces the loss") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Architecture a{{1, 21, 1}, Activation::SinLU, false, 2.0};
    GeometricNetwork net = init_xavier(a, seed);
    TrainConfig cfg = small_config(1001, false, seed);
    cfg.n_interior = 200;
    RunRecord rec = train(net, ProblemSpec::poisson({1.0}), cfg);
    REQUIRE(rec.metrics.size() >= 2);
    const double first = rec.metrics.front().total_loss;
    double at1000 = first;
    for (const auto& row : rec.metrics)
      if (row.epoch == 1000) at1000 = row.total_loss;
    CHECK(at1000 < first);
  }
}

TEST_CASE("bit-identical reruns") {
  auto run_once = [] {
    Architecture a{{1, 9, 1}, Activation::SinLU, false, 2.0};
    GeometricNetwork net = init_xavier(a, 7);
    TrainConfig cfg = small_config(120, true, 7);
    RunRecord rec = train(net, ProblemSpec::poisson({1.0}), cfg);
    return std::pair{net, rec};
  };
  auto [net1, rec1] = run_once();
  auto [net2, rec2] = run_once();
  CHECK(net1 == net2);
  REQUIRE(rec1.metrics.size() == rec2.metrics.size());
  for (std::size_t i = 0; i < rec1.metrics.size(); ++i) {
    CHECK(rec1.metrics[i].total_loss == rec2.metrics[i].total_loss);
    CHECK(rec1.metrics[i].test_euclidean == rec2.metrics[i].test_euclidean);
    CHECK(rec1.metrics[i].swaps_made == rec2.metrics[i].swaps_made);
  }
  CHECK(rec1.final_error.mse == rec2.final_error.mse);
}

TEST_CASE("swaps happen only under BIMT and the trace shows the schedule") {
  Architecture a{{1, 10, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 15);
  TrainConfig cfg = small_config(200, true, 15);
  cfg.metrics_every = 10;
  RunRecord rec = train(net, ProblemSpec::poisson({1.0}), cfg);

  // lambda schedule: boundaries at 50 and 150 for T=200
  // phase transitions leave a visible jump in reg_loss scale; check the
  // recorded lambda effect indirectly through reg_loss continuity at rows
  REQUIRE(!rec.metrics.empty());
  bool saw_phase2 = false;
  for (const auto& row : rec.metrics)
    if (row.epoch >= 50 && row.epoch < 150 && row.reg_loss > 0.0) saw_phase2 = true;
  CHECK(saw_phase2);

  // A = 0 keeps the penalty permutation-invariant: no swaps ever
  Architecture a0 = a;
  a0.geometry_scale = 0.0;
  GeometricNetwork net0 = init_xavier(a0, 15);
  RunRecord rec0 = train(net0, ProblemSpec::poisson({1.0}), small_config(120, true, 15));
  for (const auto& row : rec0.metrics) CHECK(row.swaps_made == 0);
}

TEST_CASE("reg loss jumps at the phase boundaries") {
  Architecture a{{1, 12, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 44);
  TrainConfig cfg = small_config(200, true, 44);
  cfg.metrics_every = 10;
  RunRecord rec = train(net, ProblemSpec::poisson({1.0}), cfg);

  auto reg_at = [&](long epoch) {
    for (const auto& row : rec.metrics)
      if (row.epoch == epoch) return row.reg_loss;
    FAIL("missing metrics row");
    return 0.0;
  };
  // T = 200: boundaries at 50 and 150. Ten epochs of drift cannot mask a
  // 10x lambda change.
  CHECK(reg_at(50) > 3.0 * reg_at(40));
  CHECK(reg_at(150) < 0.5 * reg_at(140));
}

TEST_CASE("train is thread-count invariant") {
  auto run_with = [](int threads) {
    Architecture a{{1, 8, 1}, Activation::SinLU, false, 2.0};
    GeometricNetwork net = init_xavier(a, 9);
    TrainConfig cfg = small_config(120, true, 9);
    cfg.threads = threads;
    RunRecord rec = train(net, ProblemSpec::poisson({1.0}), cfg);
    return std::pair{net, rec};
  };
  auto [n1, r1] = run_with(1);
  auto [n3, r3] = run_with(3);
  CHECK(n1 == n3);
  REQUIRE(r1.metrics.size() == r3.metrics.size());
  for (std::size_t i = 0; i < r1.metrics.size(); ++i)
    CHECK(r1.metrics[i].total_loss == r3.metrics[i].total_loss);
}

TEST_CASE("divergence aborts with a diagnostic record") {
  Architecture a{{1, 6, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 2);
  TrainConfig cfg = small_config(500, false, 2);
  cfg.learning_rate = 1e200;  // first step overflows the forward pass
  RunRecord rec = train(net, ProblemSpec::poisson({1.0, 4.0, 9.0, 16.0}), cfg);
  CHECK(rec.diverged);
  CHECK(rec.diverged_epoch >= 0);
  CHECK(!rec.metrics.empty());  // partial metrics retained
}

TEST_CASE("metrics row cadence") {
  Architecture a{{1, 5, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 12);
  TrainConfig cfg = small_config(101, false, 12);
  cfg.metrics_every = 25;
  RunRecord rec = train(net, ProblemSpec::poisson({1.0}), cfg);
  // rows at 0, 25, 50, 75, 100 plus the post-prune terminal row at T
  std::vector<long> epochs;
  for (const auto& row : rec.metrics) epochs.push_back(row.epoch);
  CHECK(epochs == std::vector<long>{0, 25, 50, 75, 100, 101});
}

TEST_CASE("final prune feeds the final report") {
  Architecture a{{1, 8, 1}, Activation::SinLU, false, 2.0};
  GeometricNetwork net = init_xavier(a, 19);
  TrainConfig cfg = small_config(60, true, 19);
  cfg.prune_threshold = 0.05;
  RunRecord rec = train(net, ProblemSpec::poisson({1.0}), cfg);
  // every unmasked weight now clears the threshold
  for (std::size_t l = 0; l < net.weights.size(); ++l)
    for (std::size_t k = 0; k < net.weights[l].a.size(); ++k)
      if (net.weight_mask[l].a[k]) CHECK(std::fabs(net.weights[l].a[k]) >= 0.05);
  const CollocationSet colloc = sample_collocation(ProblemSpec::poisson({1.0}), cfg.n_interior,
                                                   cfg.n_boundary, cfg.n_test, mix_seed(19, 1));
  const ErrorReport err = evaluate(net, ProblemSpec::poisson({1.0}), colloc);
  CHECK(rec.final_error.mse == err.mse);
  // evaluate is read-only: repeated calls are identical
  const ErrorReport again = evaluate(net, ProblemSpec::poisson({1.0}), colloc);
  CHECK(again.mse == err.mse);
  CHECK(again.euclidean == err.euclidean);
  CHECK(rec.prune_stats.active_units_per_layer.size() == 1);
}

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bipinn/autodiff.hpp"
#include "bipinn/bimt.hpp"
#include "bipinn/network.hpp"
#include "bipinn/problems.hpp"

// Full training loop: composite PINN loss, AdamW, BIMT schedule integration,
// swap/prune orchestration, metrics, and snapshots.
//
// Gradients are computed from one small tape per collocation point. Points
// are independent, so they may be evaluated by several threads; every
// per-point gradient lands in its own slot and the reduction walks the slots
// in point order, which makes the result bit-identical regardless of thread
// count.

namespace bipinn {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled; 0 reduces AdamW to Adam
};

struct TrainConfig {
  long epochs = 100000;
  double learning_rate = 0.002;
  AdamHyper adam;
  std::uint64_t seed = 0;
  bool bimt_enabled = true;
  PhaseSchedule schedule;  // total_epochs is overridden by `epochs`
  RegularizerConfig reg;
  double prune_threshold = 1e-3;
  long snapshot_every = 0;  // 0 = final snapshot only
  long metrics_every = 100;
  int threads = 1;  // 0 = hardware concurrency
  int n_interior = 1000;
  int n_boundary = 50;
  int n_test = 100;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
    if (reg.swap_interval < 1) throw std::invalid_argument("swap interval must be >= 1");
    if (prune_threshold <= 0.0) throw std::invalid_argument("prune threshold must be positive");
    if (metrics_every < 1) throw std::invalid_argument("metrics interval must be >= 1");
  }
};

struct OptimizerState {
  std::vector<double> m, v;
  long step = 0;

  void reset(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
  }
};

// Decoupled-weight-decay Adam over the flat (unmasked) parameter vector.
inline void adamw_step(OptimizerState& st, std::vector<double>& params,
                       std::span<const double> grads, const AdamHyper& h, double lr) {
  if (st.m.size() != params.size()) st.reset(params.size());
  ++st.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = h.beta1 * st.m[i] + (1.0 - h.beta1) * grads[i];
    st.v[i] = h.beta2 * st.v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + h.epsilon) + h.weight_decay * params[i]);
  }
}

// Convenience form operating directly on a model's unmasked parameters.
template <class Model>
void adamw_step(OptimizerState& st, Model& model, std::span<const double> grads,
                const AdamHyper& h, double lr) {
  std::vector<double> flat;
  gather_params(model, flat);
  adamw_step(st, flat, grads, h, lr);
  scatter_params(model, flat);
}

struct LossBreakdown {
  double pde = 0.0;
  std::vector<double> bc;  // one entry per boundary condition

  double bc_total() const { return std::accumulate(bc.begin(), bc.end(), 0.0); }
  double total() const { return pde + bc_total(); }
};

// ---------------------------------------------------------------------------
// Model bindings (GeometricNetwork here; ModularNetwork adds its own)
// ---------------------------------------------------------------------------

inline TapedParams make_binding(const GeometricNetwork& net, Tape& tape) {
  std::vector<Scalar> dummy(param_count(net));
  return TapedParams(net, tape, dummy);
}

inline void rebind(const GeometricNetwork& net, TapedParams& prm,
                   std::span<const Scalar> flat) {
  std::size_t k = 0;
  for (int l = 0; l + 1 < net.num_layers(); ++l) {
    for (int r = 0; r < net.weights[l].rows; ++r)
      for (int c = 0; c < net.weights[l].cols; ++c)
        if (net.weight_mask[l].at(r, c)) prm.w[l].at(r, c) = flat[k++];
    for (std::size_t i = 0; i < net.biases[l].size(); ++i)
      if (net.bias_mask[l][i]) prm.b[l][i] = flat[k++];
  }
  if (k != flat.size()) throw std::invalid_argument("parameter count mismatch");
}

inline Jet<Scalar> record_jet(const GeometricNetwork& net, const TapedParams& prm, double t) {
  return record_forward_jet(net, prm, t);
}

inline Scalar record_value(const GeometricNetwork& net, const TapedParams& prm, double t) {
  return record_forward_value(net, prm, t);
}

inline long hidden_active_units(const GeometricNetwork& net) {
  long n = 0;
  for (int c : active_units(net)) n += c;
  return n;
}

// ---------------------------------------------------------------------------
// Composite loss on a single tape (reference path; the trainer uses the
// per-point engine below, and tests assert both agree)
// ---------------------------------------------------------------------------

// Mean interior residual square plus one mean square per boundary condition,
// recorded on `tape` against freshly created parameter variables. The
// variables are returned through `params_out` so adjoints can be read back.
template <class Model>
Scalar pinn_loss(const Model& model, Tape& tape, const ProblemSpec& spec,
                 const CollocationSet& colloc, std::vector<Scalar>* params_out = nullptr,
                 LossBreakdown* breakdown = nullptr) {
  std::vector<double> flat;
  gather_params(model, flat);
  std::vector<Scalar> vars;
  vars.reserve(flat.size());
  for (double v : flat) vars.push_back(tape.variable(v));
  auto binding = make_binding(model, tape);
  rebind(model, binding, vars);

  LossBreakdown bd;
  Scalar pde_acc = tape.constant(0.0);
  for (double t : colloc.interior) {
    Scalar r = residual(spec, record_jet(model, binding, t), t);
    pde_acc = pde_acc + square(r);
  }
  Scalar loss = pde_acc * tape.constant(1.0 / static_cast<double>(colloc.interior.size()));
  bd.pde = loss.value();

  for (std::size_t b = 0; b < colloc.boundary.size(); ++b) {
    Scalar acc = tape.constant(0.0);
    for (double t : colloc.boundary[b]) {
      Scalar r = boundary_residual(spec, record_value(model, binding, t), static_cast<int>(b));
      acc = acc + square(r);
    }
    Scalar term = acc * tape.constant(1.0 / static_cast<double>(colloc.boundary[b].size()));
    bd.bc.push_back(term.value());
    loss = loss + term;
  }
  if (params_out != nullptr) *params_out = std::move(vars);
  if (breakdown != nullptr) *breakdown = bd;
  return loss;
}

// Plain-double evaluation of the same composite loss (no tape), used as the
// independent value oracle for finite-difference checks.
template <class Model>
double pinn_loss_value(const Model& model, const ProblemSpec& spec,
                       const CollocationSet& colloc) {
  double pde = 0.0;
  for (double t : colloc.interior) pde += square(residual(spec, forward_jet(model, t), t));
  double loss = pde * (1.0 / static_cast<double>(colloc.interior.size()));
  for (std::size_t b = 0; b < colloc.boundary.size(); ++b) {
    double acc = 0.0;
    for (double t : colloc.boundary[b])
      acc += square(boundary_residual(spec, forward_value(model, t), static_cast<int>(b)));
    loss += acc * (1.0 / static_cast<double>(colloc.boundary[b].size()));
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Per-point gradient engine
// ---------------------------------------------------------------------------

template <class Model>
class LossEngine {
  using Binding = decltype(make_binding(std::declval<const Model&>(), std::declval<Tape&>()));

 public:
  LossEngine(const Model& model, const ProblemSpec& spec, const CollocationSet& colloc,
             int threads)
      : spec_(spec), colloc_(colloc) {
    n_params_ = param_count(model);
    for (double t : colloc.interior) points_.push_back({t, -1});
    for (std::size_t b = 0; b < colloc.boundary.size(); ++b)
      for (double t : colloc.boundary[b]) points_.push_back({t, static_cast<int>(b)});
    point_grads_.assign(points_.size() * n_params_, 0.0);
    point_sq_.assign(points_.size(), 0.0);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    n_threads_ = threads <= 0 ? static_cast<int>(hw) : threads;
    n_threads_ = static_cast<int>(std::min<std::size_t>(n_threads_, points_.size()));
    for (int i = 0; i < n_threads_; ++i) {
      workers_.emplace_back();
      workers_.back().binding.emplace(make_binding(model, workers_.back().tape));
    }
  }

  // Evaluates loss and gradient at `flat`, writing the gradient (scaled per
  // Eq. 5's per-term normalization) into grad_out.
  void evaluate(const Model& model, std::span<const double> flat,
                std::vector<double>& grad_out, LossBreakdown& bd) {
    auto run_range = [&](Worker& w, std::size_t lo, std::size_t hi) {
      Tape& tape = w.tape;
      // Parameter leaves and shared constants form a fixed tape prefix; each
      // point truncates back to the watermark and re-records only its own
      // forward pass.
      tape.clear();
      w.vars.clear();
      for (double v : flat) w.vars.push_back(tape.variable(v));
      rebind(model, *w.binding, w.vars);
      tape.constant(0.0);
      tape.constant(1.0);
      tape.constant(2.0);
      const std::size_t watermark = tape.size();
      for (std::size_t i = lo; i < hi; ++i) {
        tape.truncate(watermark);
        const Point3 p = points_[i];
        Scalar sq = p.bc_index < 0
                        ? square(residual(spec_, record_jet(model, *w.binding, p.t), p.t))
                        : square(boundary_residual(
                              spec_, record_value(model, *w.binding, p.t), p.bc_index));
        point_sq_[i] = sq.value();
        tape.backward_into(sq, w.adj);
        double* row = &point_grads_[i * n_params_];
        for (std::size_t j = 0; j < n_params_; ++j) row[j] = w.adj[j];
      }
    };

    if (n_threads_ <= 1) {
      run_range(workers_.front(), 0, points_.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (points_.size() + n_threads_ - 1) / n_threads_;
      for (int k = 0; k < n_threads_; ++k) {
        const std::size_t lo = k * chunk;
        const std::size_t hi = std::min(points_.size(), lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, k, lo, hi] { run_range(workers_[k], lo, hi); });
      }
      for (auto& th : pool) th.join();
    }

    // Deterministic reduction: per-group sums in point order, then the
    // per-term normalizations of the composite loss.
    grad_out.assign(n_params_, 0.0);
    bd = LossBreakdown{};
    const std::size_t n_interior = colloc_.interior.size();
    const double inv_n = 1.0 / static_cast<double>(n_interior);
    scratch_.assign(n_params_, 0.0);
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < n_interior; ++i) {
      const double* row = &point_grads_[i * n_params_];
      for (std::size_t j = 0; j < n_params_; ++j) scratch_[j] += row[j];
      sq_sum += point_sq_[i];
    }
    for (std::size_t j = 0; j < n_params_; ++j) grad_out[j] += scratch_[j] * inv_n;
    bd.pde = sq_sum * inv_n;

    std::size_t base = n_interior;
    for (const auto& group : colloc_.boundary) {
      const double inv_b = 1.0 / static_cast<double>(group.size());
      scratch_.assign(n_params_, 0.0);
      sq_sum = 0.0;
      for (std::size_t i = base; i < base + group.size(); ++i) {
        const double* row = &point_grads_[i * n_params_];
        for (std::size_t j = 0; j < n_params_; ++j) scratch_[j] += row[j];
        sq_sum += point_sq_[i];
      }
      for (std::size_t j = 0; j < n_params_; ++j) grad_out[j] += scratch_[j] * inv_b;
      bd.bc.push_back(sq_sum * inv_b);
      base += group.size();
    }
  }

  std::size_t n_params() const { return n_params_; }

 private:
  struct Point3 {
    double t;
    int bc_index;  // -1 for interior
  };
  struct Worker {
    Tape tape;
    std::optional<Binding> binding;
    std::vector<Scalar> vars;
    std::vector<double> adj;
  };

  const ProblemSpec& spec_;
  const CollocationSet& colloc_;
  std::size_t n_params_ = 0;
  int n_threads_ = 1;
  std::vector<Point3> points_;
  std::deque<Worker> workers_;
  std::vector<double> point_grads_;
  std::vector<double> point_sq_;
  std::vector<double> scratch_;
};

// ---------------------------------------------------------------------------
// Run record
// ---------------------------------------------------------------------------

struct MetricsRow {
  long epoch = 0;
  double total_loss = 0.0;
  double pde_loss = 0.0;
  double bc_loss = 0.0;
  double reg_loss = 0.0;
  double test_mse = 0.0;
  double test_euclidean = 0.0;
  long active_units = 0;
  long nonzero_weights = 0;
  long swaps_made = 0;  // swaps committed since the previous row
};

struct Snapshot {
  long epoch = 0;
  GeometricNetwork net;
};

struct RunRecord {
  std::vector<MetricsRow> metrics;
  std::vector<Snapshot> snapshots;
  ErrorReport final_error;
  PruneStats prune_stats;
  bool diverged = false;
  long diverged_epoch = -1;
};

// Read-only test-grid evaluation of the current model.
template <class Model>
ErrorReport evaluate(const Model& model, const ProblemSpec& spec,
                     const CollocationSet& colloc) {
  return test_error(model, spec, colloc);
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out =
      "epoch,total_loss,pde_loss,bc_loss,reg_loss,test_mse,test_euclidean,"
      "active_units,nonzero_weights,swaps_made\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%ld,%ld\n",
                  r.epoch, r.total_loss, r.pde_loss, r.bc_loss, r.reg_loss, r.test_mse,
                  r.test_euclidean, r.active_units, r.nonzero_weights, r.swaps_made);
    out += buf;
  }
  return out;
}

namespace detail {

template <class Model>
constexpr bool supports_bimt_v = std::is_same_v<Model, GeometricNetwork>;

// Gradient of the regularizer at the current parameters, added onto grads;
// returns the penalty value.
inline double add_reg_gradient(const GeometricNetwork& net, std::span<const double> flat,
                               const LambdaPoint& lp, std::vector<double>& grads,
                               Tape& tape, std::vector<double>& adj) {
  tape.clear();
  std::vector<Scalar> vars;
  vars.reserve(flat.size());
  for (double v : flat) vars.push_back(tape.variable(v));
  TapedParams prm(net, tape, vars);
  Scalar penalty = reg_penalty(net, prm, lp.lambda, lp.bias_on, lp.weight_on);
  tape.backward_into(penalty, adj);
  for (std::size_t j = 0; j < flat.size(); ++j) grads[j] += adj[j];
  return penalty.value();
}

}  // namespace detail

// Trains the model in place: per epoch builds the loss gradient, applies one
// AdamW step, and (when BIMT is enabled) adds the scheduled penalty gradient
// and runs the periodic swap pass; finally prunes and evaluates on the test
// grid. Deterministic for a given (model, spec, config) regardless of thread
// count.
template <class Model>
RunRecord train(Model& model, const ProblemSpec& spec, const TrainConfig& config) {
  config.validate();
  constexpr bool kBimtCapable = detail::supports_bimt_v<Model>;
  if (config.bimt_enabled && !kBimtCapable)
    throw std::invalid_argument("BIMT training requires a geometric network model");

  PhaseSchedule sched = config.schedule;
  sched.total_epochs = config.epochs;

  const CollocationSet colloc = sample_collocation(
      spec, config.n_interior, config.n_boundary, config.n_test, mix_seed(config.seed, 1));

  RunRecord rec;
  LossEngine<Model> engine(model, spec, colloc, config.threads);
  OptimizerState opt;
  opt.reset(engine.n_params());

  Tape reg_tape;
  std::vector<double> reg_adj;
  std::vector<double> flat, grads;
  long swaps_since_row = 0;

  auto push_metrics = [&](long epoch, double total, const LossBreakdown& bd, double reg_value) {
    MetricsRow row;
    row.epoch = epoch;
    row.total_loss = total;
    row.pde_loss = bd.pde;
    row.bc_loss = bd.bc_total();
    row.reg_loss = reg_value;
    const ErrorReport err = test_error(model, spec, colloc);
    row.test_mse = err.mse;
    row.test_euclidean = err.euclidean;
    row.active_units = hidden_active_units(model);
    row.nonzero_weights = static_cast<long>(nonzero_weight_count(model));
    row.swaps_made = swaps_since_row;
    swaps_since_row = 0;
    rec.metrics.push_back(row);
  };

  for (long epoch = 0; epoch < config.epochs; ++epoch) {
    LambdaPoint lp;
    if (config.bimt_enabled) lp = lambda_at(epoch, sched);

    gather_params(model, flat);
    LossBreakdown bd;
    engine.evaluate(model, flat, grads, bd);

    double reg_value = 0.0;
    if constexpr (kBimtCapable) {
      if (config.bimt_enabled && lp.lambda > 0.0 && (lp.weight_on || lp.bias_on))
        reg_value = detail::add_reg_gradient(model, flat, lp, grads, reg_tape, reg_adj);
    }
    const double total = bd.total() + reg_value;

    const bool metrics_due = (epoch % config.metrics_every == 0);
    if (!std::isfinite(total)) {
      push_metrics(epoch, total, bd, reg_value);
      rec.diverged = true;
      rec.diverged_epoch = epoch;
      return rec;
    }
    if (metrics_due) push_metrics(epoch, total, bd, reg_value);
    if constexpr (kBimtCapable) {
      if (config.snapshot_every > 0 && epoch % config.snapshot_every == 0)
        rec.snapshots.push_back(Snapshot{epoch, model});
    }

    adamw_step(opt, flat, grads, config.adam, config.learning_rate);
    scatter_params(model, flat);

    if constexpr (kBimtCapable) {
      if (config.bimt_enabled && (epoch + 1) % config.reg.swap_interval == 0)
        swaps_since_row += try_swaps(model, lp.lambda, lp.bias_on);
    }
  }

  rec.prune_stats = prune(model, config.prune_threshold);
  rec.final_error = test_error(model, spec, colloc);
  if constexpr (kBimtCapable)
    rec.snapshots.push_back(Snapshot{config.epochs, model});

  // Terminal row: the post-prune state, with the loss re-evaluated at the
  // final parameters under the last epoch's penalty setting.
  {
    gather_params(model, flat);
    LossBreakdown bd;
    engine.evaluate(model, flat, grads, bd);
    double reg_value = 0.0;
    if constexpr (kBimtCapable) {
      if (config.bimt_enabled) {
        const LambdaPoint lp = lambda_at(config.epochs - 1, sched);
        if (lp.lambda > 0.0 && (lp.weight_on || lp.bias_on))
          reg_value = detail::add_reg_gradient(model, flat, lp, grads, reg_tape, reg_adj);
      }
    }
    push_metrics(config.epochs, bd.total() + reg_value, bd, reg_value);
  }
  return rec;
}

}  // namespace bipinn

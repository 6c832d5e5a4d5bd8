#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "bipinn/network.hpp"
#include "bipinn/rng.hpp"
#include "bipinn/trainer.hpp"

// Bare-minimum architecture templates extracted from pruned runs, and
// composites of k parallel instances whose outputs are summed.

namespace bipinn {

struct ModuleTemplate {
  std::vector<int> layer_sizes;
  std::vector<Grid<std::uint8_t>> weight_mask;
  std::vector<std::vector<std::uint8_t>> bias_mask;
  Activation activation = Activation::SinLU;
  bool final_activation = false;
};

struct ExtractionResult {
  ModuleTemplate tmpl;
  GeometricNetwork compacted;  // source network with inactive units removed
};

// Removes inactive units layer by layer (iterating to a fixed point, since
// dropping a unit can orphan its neighbors), compacting indices. The
// surviving connectivity becomes the template mask; the compacted network
// computes the same function as the source.
inline ExtractionResult extract(const GeometricNetwork& net) {
  const int L = net.num_layers();
  std::vector<std::vector<char>> keep(L);
  for (int l = 0; l < L; ++l) keep[l].assign(net.layer_size(l), 1);

  // A surviving unit needs a kept nonzero outgoing edge (except the output
  // layer) and either a kept nonzero incoming edge or a nonzero bias (except
  // the input layer).
  bool changed = true;
  while (changed) {
    changed = false;
    for (int l = 0; l < L; ++l) {
      for (int i = 0; i < net.layer_size(l); ++i) {
        if (!keep[l][i]) continue;
        bool ok = true;
        if (l + 1 < L) {
          bool out = false;
          const Grid<double>& w = net.weights[l];
          for (int r = 0; r < w.rows && !out; ++r)
            out = keep[l + 1][r] && net.weight_mask[l].at(r, i) && w.at(r, i) != 0.0;
          ok = out;
        }
        if (ok && l > 0) {
          bool in = net.bias_mask[l - 1][i] && net.biases[l - 1][i] != 0.0;
          const Grid<double>& w = net.weights[l - 1];
          for (int c = 0; c < w.cols && !in; ++c)
            in = keep[l - 1][c] && net.weight_mask[l - 1].at(i, c) && w.at(i, c) != 0.0;
          ok = in;
        }
        if (!ok) {
          keep[l][i] = 0;
          changed = true;
        }
      }
    }
  }

  std::vector<int> sizes(L);
  std::vector<std::vector<int>> old_index(L);
  for (int l = 0; l < L; ++l) {
    for (int i = 0; i < net.layer_size(l); ++i)
      if (keep[l][i]) old_index[l].push_back(i);
    sizes[l] = static_cast<int>(old_index[l].size());
    if (sizes[l] == 0) throw std::runtime_error("extraction: no active path from input to output");
  }

  Architecture arch = net.arch;
  arch.layer_sizes = sizes;

  GeometricNetwork out;
  out.arch = arch;
  out.coords = layout_coords(arch);
  for (int l = 0; l + 1 < L; ++l) {
    Grid<double> w(sizes[l + 1], sizes[l]);
    Grid<std::uint8_t> wm(sizes[l + 1], sizes[l]);
    std::vector<double> b(sizes[l + 1]);
    std::vector<std::uint8_t> bm(sizes[l + 1]);
    for (int r = 0; r < sizes[l + 1]; ++r) {
      const int ro = old_index[l + 1][r];
      b[r] = net.biases[l][ro];
      bm[r] = net.bias_mask[l][ro];
      for (int c = 0; c < sizes[l]; ++c) {
        const int co = old_index[l][c];
        w.at(r, c) = net.weights[l].at(ro, co);
        wm.at(r, c) = net.weight_mask[l].at(ro, co);
      }
    }
    out.weights.push_back(std::move(w));
    out.weight_mask.push_back(std::move(wm));
    out.biases.push_back(std::move(b));
    out.bias_mask.push_back(std::move(bm));
  }

  ModuleTemplate tmpl;
  tmpl.layer_sizes = sizes;
  tmpl.weight_mask = out.weight_mask;
  tmpl.bias_mask = out.bias_mask;
  tmpl.activation = arch.activation;
  tmpl.final_activation = arch.final_activation;
  return ExtractionResult{std::move(tmpl), std::move(out)};
}

inline ModuleTemplate extract_template(const GeometricNetwork& net) {
  return extract(net).tmpl;
}

// Fully dense template of the given shape (every connection allowed).
inline ModuleTemplate dense_template(std::vector<int> layer_sizes, Activation act,
                                     bool final_activation = false) {
  ModuleTemplate t;
  t.activation = act;
  t.final_activation = final_activation;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    t.weight_mask.emplace_back(layer_sizes[l + 1], layer_sizes[l], std::uint8_t{1});
    t.bias_mask.emplace_back(layer_sizes[l + 1], std::uint8_t{1});
  }
  t.layer_sizes = std::move(layer_sizes);
  return t;
}

struct ModularNetwork {
  std::vector<GeometricNetwork> instances;

  int k() const { return static_cast<int>(instances.size()); }
};

// k parallel instances of the template, each freshly Xavier-initialized with
// its masks enforced from the start (masked entries stay exactly 0).
inline ModularNetwork build_modular(const ModuleTemplate& tmpl, int k, std::uint64_t seed,
                                    double geometry_scale = 2.0) {
  if (k < 1) throw std::invalid_argument("module count must be >= 1");
  Architecture arch;
  arch.layer_sizes = tmpl.layer_sizes;
  arch.activation = tmpl.activation;
  arch.final_activation = tmpl.final_activation;
  arch.geometry_scale = geometry_scale;
  ModularNetwork m;
  m.instances.reserve(k);
  for (int i = 0; i < k; ++i) {
    GeometricNetwork net = init_xavier(arch, mix_seed(seed, static_cast<std::uint64_t>(i)));
    net.weight_mask = tmpl.weight_mask;
    net.bias_mask = tmpl.bias_mask;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      for (std::size_t j = 0; j < net.weights[l].a.size(); ++j)
        if (!net.weight_mask[l].a[j]) net.weights[l].a[j] = 0.0;
      for (std::size_t j = 0; j < net.biases[l].size(); ++j)
        if (!net.bias_mask[l][j]) net.biases[l][j] = 0.0;
    }
    m.instances.push_back(std::move(net));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward evaluation and model-trait functions
// ---------------------------------------------------------------------------

inline Jet<double> forward_jet(const ModularNetwork& m, double t) {
  Jet<double> sum{0.0, 0.0, 0.0};
  for (const auto& inst : m.instances) {
    const Jet<double> j = forward_jet(inst, t);
    sum.u += j.u;
    sum.du += j.du;
    sum.ddu += j.ddu;
  }
  return sum;
}

inline Jet<double> forward_modular(const ModularNetwork& m, double t) {
  return forward_jet(m, t);
}

inline double forward_value(const ModularNetwork& m, double t) {
  double s = 0.0;
  for (const auto& inst : m.instances) s += forward_value(inst, t);
  return s;
}

inline std::size_t param_count(const ModularNetwork& m) {
  std::size_t n = 0;
  for (const auto& inst : m.instances) n += param_count(inst);
  return n;
}

inline void gather_params(const ModularNetwork& m, std::vector<double>& out) {
  out.clear();
  out.reserve(param_count(m));
  std::vector<double> tmp;
  for (const auto& inst : m.instances) {
    gather_params(inst, tmp);
    out.insert(out.end(), tmp.begin(), tmp.end());
  }
}

inline void scatter_params(ModularNetwork& m, std::span<const double> flat) {
  std::size_t off = 0;
  for (auto& inst : m.instances) {
    const std::size_t n = param_count(inst);
    scatter_params(inst, flat.subspan(off, n));
    off += n;
  }
  if (off != flat.size()) throw std::invalid_argument("parameter count mismatch");
}

struct ModularBinding {
  std::vector<TapedParams> parts;
};

inline ModularBinding make_binding(const ModularNetwork& m, Tape& tape) {
  ModularBinding b;
  b.parts.reserve(m.instances.size());
  for (const auto& inst : m.instances) b.parts.push_back(make_binding(inst, tape));
  return b;
}

inline void rebind(const ModularNetwork& m, ModularBinding& b, std::span<const Scalar> flat) {
  std::size_t off = 0;
  for (std::size_t i = 0; i < m.instances.size(); ++i) {
    const std::size_t n = param_count(m.instances[i]);
    rebind(m.instances[i], b.parts[i], flat.subspan(off, n));
    off += n;
  }
}

inline Jet<Scalar> record_jet(const ModularNetwork& m, const ModularBinding& b, double t) {
  Jet<Scalar> sum = record_forward_jet(m.instances[0], b.parts[0], t);
  for (std::size_t i = 1; i < m.instances.size(); ++i) {
    const Jet<Scalar> j = record_forward_jet(m.instances[i], b.parts[i], t);
    sum.u = sum.u + j.u;
    sum.du = sum.du + j.du;
    sum.ddu = sum.ddu + j.ddu;
  }
  return sum;
}

inline Scalar record_value(const ModularNetwork& m, const ModularBinding& b, double t) {
  Scalar sum = record_forward_value(m.instances[0], b.parts[0], t);
  for (std::size_t i = 1; i < m.instances.size(); ++i)
    sum = sum + record_forward_value(m.instances[i], b.parts[i], t);
  return sum;
}

inline long hidden_active_units(const ModularNetwork& m) {
  long n = 0;
  for (const auto& inst : m.instances) n += hidden_active_units(inst);
  return n;
}

inline std::size_t nonzero_weight_count(const ModularNetwork& m) {
  std::size_t n = 0;
  for (const auto& inst : m.instances) n += nonzero_weight_count(inst);
  return n;
}

inline std::size_t total_weight_count(const ModularNetwork& m) {
  std::size_t n = 0;
  for (const auto& inst : m.instances) n += total_weight_count(inst);
  return n;
}

inline PruneStats prune(ModularNetwork& m, double threshold) {
  PruneStats stats;
  for (auto& inst : m.instances) {
    const PruneStats s = prune(inst, threshold);
    stats.zeroed_weights += s.zeroed_weights;
    stats.zeroed_biases += s.zeroed_biases;
    stats.active_units_per_layer.insert(stats.active_units_per_layer.end(),
                                        s.active_units_per_layer.begin(),
                                        s.active_units_per_layer.end());
  }
  return stats;
}

// Trains the composite as a plain PINN: no penalty, no swaps; the template
// masks make masked entries invisible to the optimizer.
inline RunRecord train_modular(ModularNetwork& m, const ProblemSpec& spec, TrainConfig config) {
  config.bimt_enabled = false;
  config.schedule.lambda_phase1 = 0.0;
  config.schedule.lambda_phase2 = 0.0;
  config.schedule.lambda_phase3 = 0.0;
  return train(m, spec, config);
}

}  // namespace bipinn

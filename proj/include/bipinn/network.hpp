#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bipinn/activations.hpp"
#include "bipinn/autodiff.hpp"
#include "bipinn/rng.hpp"

// Geometric MLP: dense layers with a 2D coordinate attached to every neural
// unit, boolean masks on weights and biases, and forward evaluation over
// second-order jets.

namespace bipinn {

template <class T>
struct Grid {
  int rows = 0, cols = 0;
  std::vector<T> a;

  Grid() = default;
  Grid(int r, int c, T fill = T{}) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  T& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  bool operator==(const Grid&) const = default;
};

struct Point {
  double x = 0.0, y = 0.0;
  bool operator==(const Point&) const = default;
};

struct Architecture {
  std::vector<int> layer_sizes;  // first and last are 1 for the 1D problems
  Activation activation = Activation::SinLU;
  bool final_activation = false;
  double geometry_scale = 2.0;  // layer width A in the BIMT geometry

  int num_layers() const { return static_cast<int>(layer_sizes.size()); }

  bool operator==(const Architecture&) const = default;

  void validate() const {
    if (layer_sizes.size() < 3)
      throw std::invalid_argument("architecture needs at least one hidden layer");
    for (int n : layer_sizes)
      if (n <= 0) throw std::invalid_argument("layer sizes must be positive");
    if (geometry_scale < 0.0)
      throw std::invalid_argument("geometry scale A must be non-negative");
  }
};

// x-coordinate of unit k within a layer of n units: the layer spans width A,
// centered on 0, so A = 0 collapses every unit onto the same column.
inline double unit_x(double A, int n, int k) {
  return A * (k - (n - 1) / 2.0) / std::max(n - 1, 1);
}

struct GeometricNetwork {
  Architecture arch;
  std::vector<Grid<double>> weights;             // [L-1], layer l maps n_l -> n_{l+1}
  std::vector<std::vector<double>> biases;       // [L-1], size n_{l+1}
  std::vector<Grid<std::uint8_t>> weight_mask;   // 1 = trainable, 0 = frozen at 0
  std::vector<std::vector<std::uint8_t>> bias_mask;
  std::vector<std::vector<Point>> coords;        // [L][n_l]

  int num_layers() const { return arch.num_layers(); }
  int layer_size(int l) const { return arch.layer_sizes[l]; }

  bool is_hidden_layer(int l) const { return l >= 1 && l + 1 < num_layers(); }

  void check_hidden(int l) const {
    if (!is_hidden_layer(l)) throw std::out_of_range("not a hidden layer index");
  }

  bool operator==(const GeometricNetwork&) const = default;
};

inline std::vector<std::vector<Point>> layout_coords(const Architecture& arch) {
  std::vector<std::vector<Point>> coords(arch.layer_sizes.size());
  for (std::size_t l = 0; l < arch.layer_sizes.size(); ++l) {
    const int n = arch.layer_sizes[l];
    coords[l].resize(n);
    for (int k = 0; k < n; ++k)
      coords[l][k] = Point{unit_x(arch.geometry_scale, n, k), static_cast<double>(l)};
  }
  return coords;
}

// Glorot-uniform weights, all biases at 0.01, all-true masks. Deterministic
// for a given seed.
inline GeometricNetwork init_xavier(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  GeometricNetwork net;
  net.arch = arch;
  net.coords = layout_coords(arch);
  Rng rng(seed);
  const int L = arch.num_layers();
  net.weights.reserve(L - 1);
  for (int l = 0; l + 1 < L; ++l) {
    const int fan_in = arch.layer_sizes[l];
    const int fan_out = arch.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Grid<double> w(fan_out, fan_in);
    for (double& v : w.a) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.01);
    net.weight_mask.emplace_back(fan_out, fan_in, std::uint8_t{1});
    net.bias_mask.emplace_back(fan_out, std::uint8_t{1});
  }
  return net;
}

// ---------------------------------------------------------------------------
// Forward evaluation
// ---------------------------------------------------------------------------

// Parameter providers give forward kernels a uniform view of the weights,
// either as plain doubles (evaluation) or as tape Scalars (training).
struct DenseParams {
  using num_type = double;
  const GeometricNetwork& net;
  mutable std::vector<Jet<double>> jet_cur, jet_nxt;

  double weight(int l, int r, int c) const { return net.weights[l].at(r, c); }
  double bias(int l, int r) const { return net.biases[l][r]; }
  double make_constant(double v) const { return v; }
  Jet<double> seed(double t) const { return jet_seed(t); }
};

// Binds every unmasked parameter to a tape Scalar, in the canonical
// enumeration order (per layer: weights row-major, then biases).
struct TapedParams {
  using num_type = Scalar;
  const GeometricNetwork& net;
  Tape& tape;
  std::vector<Grid<Scalar>> w;
  std::vector<std::vector<Scalar>> b;
  // Scratch for the forward kernels, hoisted out of the per-point hot path.
  mutable std::vector<Jet<Scalar>> jet_cur, jet_nxt;
  mutable std::vector<Scalar> val_cur, val_nxt;

  TapedParams(const GeometricNetwork& n, Tape& t, std::span<const Scalar> flat)
      : net(n), tape(t) {
    std::size_t k = 0;
    const int L = n.num_layers();
    w.resize(L - 1);
    b.resize(L - 1);
    for (int l = 0; l + 1 < L; ++l) {
      w[l] = Grid<Scalar>(n.weights[l].rows, n.weights[l].cols);
      for (int r = 0; r < n.weights[l].rows; ++r)
        for (int c = 0; c < n.weights[l].cols; ++c)
          if (n.weight_mask[l].at(r, c)) w[l].at(r, c) = flat[k++];
      b[l].resize(n.biases[l].size());
      for (std::size_t i = 0; i < n.biases[l].size(); ++i)
        if (n.bias_mask[l][i]) b[l][i] = flat[k++];
    }
    if (k != flat.size()) throw std::invalid_argument("parameter count mismatch");
  }

  Scalar weight(int l, int r, int c) const { return w[l].at(r, c); }
  Scalar bias(int l, int r) const { return b[l][r]; }
  Scalar make_constant(double v) const { return tape.constant(v); }
  Jet<Scalar> seed(double t) const { return jet_seed(tape, t); }
};

// Jet forward pass: affine maps act componentwise on (u, du, ddu) by
// linearity, activations go through the second-order chain rule. Masked
// entries are skipped entirely, so they contribute neither value nor
// gradient. Accumulation order is fixed (ascending unit index).
template <class P>
Jet<typename P::num_type> forward_jet_with(const GeometricNetwork& net, const P& prm,
                                           double t) {
  using Num = typename P::num_type;
  const int L = net.num_layers();
  if (net.layer_size(0) != 1 || net.layer_size(L - 1) != 1)
    throw std::invalid_argument("forward_jet expects a single input and output");

  auto& cur = prm.jet_cur;
  auto& nxt = prm.jet_nxt;
  cur.assign(1, prm.seed(t));
  for (int l = 0; l + 1 < L; ++l) {
    const int n_out = net.layer_size(l + 1);
    const int n_in = net.layer_size(l);
    nxt.assign(n_out, Jet<Num>{});
    for (int r = 0; r < n_out; ++r) {
      Num su = net.bias_mask[l][r] ? prm.bias(l, r) : prm.make_constant(0.0);
      Num sdu;
      Num sddu;
      bool have_d = false;
      for (int c = 0; c < n_in; ++c) {
        if (!net.weight_mask[l].at(r, c)) continue;
        Num w = prm.weight(l, r, c);
        su = madd(su, w, cur[c].u);
        if (!have_d) {
          sdu = w * cur[c].du;
          sddu = w * cur[c].ddu;
          have_d = true;
        } else {
          sdu = madd(sdu, w, cur[c].du);
          sddu = madd(sddu, w, cur[c].ddu);
        }
      }
      if (!have_d) {
        sdu = prm.make_constant(0.0);
        sddu = prm.make_constant(0.0);
      }
      Jet<Num> z{su, sdu, sddu};
      const bool is_output = (l + 2 == L);
      if (is_output && !net.arch.final_activation)
        nxt[r] = z;
      else
        nxt[r] = jet_chain(activation_eval2(net.arch.activation, z.u), z);
    }
    cur.swap(nxt);
  }
  return cur[0];
}

// Value-only taped pass for boundary residuals: same traversal, u channel only.
inline Scalar record_forward_value(const GeometricNetwork& net, const TapedParams& prm,
                                   double t) {
  const int L = net.num_layers();
  auto& cur = prm.val_cur;
  auto& nxt = prm.val_nxt;
  cur.assign(1, prm.tape.constant(t));
  for (int l = 0; l + 1 < L; ++l) {
    const int n_out = net.layer_size(l + 1);
    nxt.assign(n_out, Scalar{});
    for (int r = 0; r < n_out; ++r) {
      Scalar s = net.bias_mask[l][r] ? prm.bias(l, r) : prm.tape.constant(0.0);
      for (int c = 0; c < net.layer_size(l); ++c) {
        if (!net.weight_mask[l].at(r, c)) continue;
        s = madd(s, prm.weight(l, r, c), cur[c]);
      }
      const bool is_output = (l + 2 == L);
      nxt[r] = (is_output && !net.arch.final_activation)
                   ? s
                   : activation_value(net.arch.activation, s);
    }
    cur.swap(nxt);
  }
  return cur[0];
}

inline Jet<Scalar> record_forward_jet(const GeometricNetwork& net, const TapedParams& prm,
                                      double t) {
  return forward_jet_with(net, prm, t);
}

// Jet evaluation with plain doubles (no tape).
inline Jet<double> forward_jet(const GeometricNetwork& net, double t) {
  return forward_jet_with(net, DenseParams{net}, t);
}

// Independent value-only forward pass. Walks the raw dense storage (masked
// entries hold exact zeros) rather than the jet machinery, so it serves as a
// cross-check of forward_jet(...).u.
inline double forward_value(const GeometricNetwork& net, double t) {
  const int L = net.num_layers();
  std::vector<double> cur(1, t);
  std::vector<double> nxt;
  for (int l = 0; l + 1 < L; ++l) {
    const int n_out = net.layer_size(l + 1);
    nxt.assign(n_out, 0.0);
    for (int r = 0; r < n_out; ++r) {
      double s = net.biases[l][r];
      for (int c = 0; c < net.layer_size(l); ++c) s += net.weights[l].at(r, c) * cur[c];
      const bool is_output = (l + 2 == L);
      nxt[r] = (is_output && !net.arch.final_activation)
                   ? s
                   : activation_value(net.arch.activation, s);
    }
    cur.swap(nxt);
  }
  return cur[0];
}

// ---------------------------------------------------------------------------
// Unit importance, swapping, pruning
// ---------------------------------------------------------------------------

// Sum of absolute incident weights (incoming row plus outgoing column).
// Masked entries hold exact zeros, so they drop out automatically.
inline std::vector<double> importance(const GeometricNetwork& net, int layer) {
  net.check_hidden(layer);
  const Grid<double>& win = net.weights[layer - 1];
  const Grid<double>& wout = net.weights[layer];
  std::vector<double> imp(net.layer_size(layer), 0.0);
  for (int i = 0; i < net.layer_size(layer); ++i) {
    double s = 0.0;
    for (int c = 0; c < win.cols; ++c) s += std::fabs(win.at(i, c));
    for (int r = 0; r < wout.rows; ++r) s += std::fabs(wout.at(r, i));
    imp[i] = s;
  }
  return imp;
}

// Exchange two units of a hidden layer: incoming rows, biases, outgoing
// columns, and the corresponding mask entries. Coordinates stay attached to
// slot positions, so the network function is unchanged.
inline void swap_units(GeometricNetwork& net, int layer, int i, int j) {
  net.check_hidden(layer);
  const int n = net.layer_size(layer);
  if (i < 0 || j < 0 || i >= n || j >= n) throw std::out_of_range("unit index out of range");
  if (i == j) throw std::invalid_argument("swap requires two distinct units");
  Grid<double>& win = net.weights[layer - 1];
  Grid<std::uint8_t>& win_m = net.weight_mask[layer - 1];
  for (int c = 0; c < win.cols; ++c) {
    std::swap(win.at(i, c), win.at(j, c));
    std::swap(win_m.at(i, c), win_m.at(j, c));
  }
  std::swap(net.biases[layer - 1][i], net.biases[layer - 1][j]);
  std::swap(net.bias_mask[layer - 1][i], net.bias_mask[layer - 1][j]);
  Grid<double>& wout = net.weights[layer];
  Grid<std::uint8_t>& wout_m = net.weight_mask[layer];
  for (int r = 0; r < wout.rows; ++r) {
    std::swap(wout.at(r, i), wout.at(r, j));
    std::swap(wout_m.at(r, i), wout_m.at(r, j));
  }
}

struct PruneStats {
  std::size_t zeroed_weights = 0;
  std::size_t zeroed_biases = 0;
  std::vector<int> active_units_per_layer;  // hidden layers only
};

// A unit is active when it keeps at least one unmasked nonzero outgoing
// weight and either an unmasked nonzero incoming weight or a nonzero bias.
inline bool unit_active(const GeometricNetwork& net, int layer, int i) {
  net.check_hidden(layer);
  const Grid<double>& wout = net.weights[layer];
  const Grid<std::uint8_t>& wout_m = net.weight_mask[layer];
  bool out_ok = false;
  for (int r = 0; r < wout.rows && !out_ok; ++r)
    out_ok = wout_m.at(r, i) && wout.at(r, i) != 0.0;
  if (!out_ok) return false;
  const Grid<double>& win = net.weights[layer - 1];
  const Grid<std::uint8_t>& win_m = net.weight_mask[layer - 1];
  for (int c = 0; c < win.cols; ++c)
    if (win_m.at(i, c) && win.at(i, c) != 0.0) return true;
  return net.bias_mask[layer - 1][i] && net.biases[layer - 1][i] != 0.0;
}

inline std::vector<int> active_units(const GeometricNetwork& net) {
  std::vector<int> counts;
  for (int l = 1; l + 1 < net.num_layers(); ++l) {
    int c = 0;
    for (int i = 0; i < net.layer_size(l); ++i) c += unit_active(net, l, i) ? 1 : 0;
    counts.push_back(c);
  }
  return counts;
}

// Zero and permanently mask every weight/bias with |value| < threshold
// (strict inequality: entries exactly at the threshold survive).
inline PruneStats prune(GeometricNetwork& net, double threshold) {
  if (threshold <= 0.0) throw std::invalid_argument("prune threshold must be positive");
  PruneStats stats;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Grid<double>& w = net.weights[l];
    Grid<std::uint8_t>& m = net.weight_mask[l];
    for (std::size_t k = 0; k < w.a.size(); ++k) {
      if (m.a[k] && std::fabs(w.a[k]) < threshold) {
        ++stats.zeroed_weights;
        w.a[k] = 0.0;
        m.a[k] = 0;
      }
    }
    for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
      if (net.bias_mask[l][i] && std::fabs(net.biases[l][i]) < threshold) {
        ++stats.zeroed_biases;
        net.biases[l][i] = 0.0;
        net.bias_mask[l][i] = 0;
      }
    }
  }
  stats.active_units_per_layer = active_units(net);
  return stats;
}

inline std::size_t nonzero_weight_count(const GeometricNetwork& net) {
  std::size_t n = 0;
  for (const auto& w : net.weights)
    for (double v : w.a)
      if (v != 0.0) ++n;
  return n;
}

inline std::size_t total_weight_count(const GeometricNetwork& net) {
  std::size_t n = 0;
  for (const auto& w : net.weights) n += w.a.size();
  return n;
}

// ---------------------------------------------------------------------------
// Canonical parameter enumeration (shared by layout, gather/scatter, binding)
// ---------------------------------------------------------------------------

inline std::size_t param_count(const GeometricNetwork& net) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (auto m : net.weight_mask[l].a) n += m ? 1 : 0;
    for (auto m : net.bias_mask[l]) n += m ? 1 : 0;
  }
  return n;
}

inline void gather_params(const GeometricNetwork& net, std::vector<double>& out) {
  out.clear();
  out.reserve(param_count(net));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t k = 0; k < net.weights[l].a.size(); ++k)
      if (net.weight_mask[l].a[k]) out.push_back(net.weights[l].a[k]);
    for (std::size_t i = 0; i < net.biases[l].size(); ++i)
      if (net.bias_mask[l][i]) out.push_back(net.biases[l][i]);
  }
}

inline void scatter_params(GeometricNetwork& net, std::span<const double> flat) {
  std::size_t k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t j = 0; j < net.weights[l].a.size(); ++j)
      if (net.weight_mask[l].a[j]) net.weights[l].a[j] = flat[k++];
    for (std::size_t i = 0; i < net.biases[l].size(); ++i)
      if (net.bias_mask[l][i]) net.biases[l][i] = flat[k++];
  }
  if (k != flat.size()) throw std::invalid_argument("parameter count mismatch");
}

}  // namespace bipinn

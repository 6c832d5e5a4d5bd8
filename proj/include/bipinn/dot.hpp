#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "bipinn/network.hpp"

// Graphviz rendering of a network snapshot: one node per active unit at its
// stored coordinates, one edge per unmasked nonzero weight (red positive,
// blue negative, pen width proportional to |w|, clamped to [0.2, 5]).

namespace bipinn {

namespace detail {

// Activity rule extended to the input/output layers: constraints that have
// no corresponding side (no incoming edges for inputs, no outgoing for
// outputs) are considered satisfied.
inline bool dot_unit_active(const GeometricNetwork& net, int layer, int i) {
  const int L = net.num_layers();
  if (layer + 1 < L) {
    bool out = false;
    for (int r = 0; r < net.weights[layer].rows && !out; ++r)
      out = net.weight_mask[layer].at(r, i) && net.weights[layer].at(r, i) != 0.0;
    if (!out) return false;
  }
  if (layer > 0) {
    bool in = net.bias_mask[layer - 1][i] && net.biases[layer - 1][i] != 0.0;
    for (int c = 0; c < net.weights[layer - 1].cols && !in; ++c)
      in = net.weight_mask[layer - 1].at(i, c) && net.weights[layer - 1].at(i, c) != 0.0;
    if (!in) return false;
  }
  return true;
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace detail

inline std::string export_dot(const GeometricNetwork& net) {
  const int L = net.num_layers();
  std::vector<std::vector<bool>> active(L);
  double max_w = 0.0;
  for (int l = 0; l < L; ++l) {
    active[l].resize(net.layer_size(l));
    for (int i = 0; i < net.layer_size(l); ++i)
      active[l][i] = detail::dot_unit_active(net, l, i);
  }
  for (const auto& w : net.weights)
    for (double v : w.a) max_w = std::max(max_w, std::fabs(v));

  std::string out = "digraph pinn {\n";
  out += "  graph [splines=line];\n";
  out += "  node [shape=circle, fixedsize=true, width=0.25, fontsize=8];\n";
  for (int l = 0; l < L; ++l)
    for (int i = 0; i < net.layer_size(l); ++i) {
      if (!active[l][i]) continue;
      const Point& p = net.coords[l][i];
      out += "  u" + std::to_string(l) + "_" + std::to_string(i) + " [pos=\"" +
             detail::fmt("%.4f", p.x) + "," + detail::fmt("%.4f", p.y) + "!\"];\n";
    }
  for (int l = 0; l + 1 < L; ++l) {
    const Grid<double>& w = net.weights[l];
    for (int r = 0; r < w.rows; ++r)
      for (int c = 0; c < w.cols; ++c) {
        const double v = w.at(r, c);
        if (!net.weight_mask[l].at(r, c) || v == 0.0) continue;
        if (!active[l][c] || !active[l + 1][r]) continue;
        const double width =
            std::clamp(max_w > 0.0 ? 5.0 * std::fabs(v) / max_w : 0.2, 0.2, 5.0);
        out += "  u" + std::to_string(l) + "_" + std::to_string(c) + " -> u" +
               std::to_string(l + 1) + "_" + std::to_string(r) + " [color=" +
               (v > 0.0 ? "red" : "blue") + ", penwidth=" + detail::fmt("%.3f", width) +
               "];\n";
      }
  }
  out += "}\n";
  return out;
}

}  // namespace bipinn

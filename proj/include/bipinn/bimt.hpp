#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bipinn/autodiff.hpp"
#include "bipinn/network.hpp"

// Brain-inspired modular training machinery: the three-phase penalty
// schedule, the distance-weighted L1 term, and locality-improving unit swaps.

namespace bipinn {

struct PhaseSchedule {
  long total_epochs = 100000;
  double lambda_phase1 = 0.001;
  double lambda_phase2 = 0.01;
  double lambda_phase3 = 0.001;
  bool bias_penalty_in_phase3 = true;
  // Keeping the weight term alongside the bias penalty in phase 3 preserves
  // the sparsity won in phase 2; releasing it lets marginal weights regrow
  // past the prune threshold. The flag exposes the released variant.
  bool weight_penalty_in_phase3 = true;

  long boundary1() const { return total_epochs / 4; }
  long boundary2() const { return 3 * total_epochs / 4; }
};

struct RegularizerConfig {
  double locality_scale = 2.0;  // A; also feeds Architecture::geometry_scale
  long swap_interval = 200;     // epochs between swap passes
};

struct LambdaPoint {
  double lambda = 0.0;
  bool bias_on = false;
  bool weight_on = true;
};

// Piecewise-constant schedule: [0, T/4) weight penalty at lambda_phase1,
// [T/4, 3T/4) at lambda_phase2, [3T/4, T) back down at lambda_phase3 with
// the bias penalty switched on.
inline LambdaPoint lambda_at(long epoch, const PhaseSchedule& s) {
  if (epoch < 0 || epoch >= s.total_epochs)
    throw std::out_of_range("epoch outside schedule");
  if (epoch < s.boundary1()) return {s.lambda_phase1, false, true};
  if (epoch < s.boundary2()) return {s.lambda_phase2, false, true};
  return {s.lambda_phase3, s.bias_penalty_in_phase3, s.weight_penalty_in_phase3};
}

inline double euclidean_distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Distance between two units in adjacent layers, from their stored coords.
inline double distance(const GeometricNetwork& net, int layer_a, int unit_a,
                       int layer_b, int unit_b) {
  if (std::abs(layer_a - layer_b) != 1)
    throw std::invalid_argument("distance is defined between adjacent layers");
  return euclidean_distance(net.coords[layer_a][unit_a], net.coords[layer_b][unit_b]);
}

struct PenaltyBreakdown {
  double weight_term = 0.0;  // sum of d_ij |w_ij| over unmasked edges
  double bias_term = 0.0;    // sum of |b_i| over unmasked biases
  double lambda = 0.0;
};

// Plain-double distance-weighted weight term, canonical (layer, row, col)
// summation order.
inline double weight_penalty_value(const GeometricNetwork& net) {
  double s = 0.0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Grid<double>& w = net.weights[l];
    for (int r = 0; r < w.rows; ++r)
      for (int c = 0; c < w.cols; ++c)
        if (net.weight_mask[l].at(r, c))
          s += euclidean_distance(net.coords[l][c], net.coords[l + 1][r]) *
               std::fabs(w.at(r, c));
  }
  return s;
}

// lambda * ([weight_on] sum d_ij |w_ij| + [bias_on] sum |b_i|) recorded on
// the tape, so backward yields the subgradient lambda * d_ij * sign(w_ij)
// per edge (and lambda * sign(b_i) per bias).
inline Scalar reg_penalty(const GeometricNetwork& net, const TapedParams& prm,
                          double lambda, bool bias_on, bool weight_on = true,
                          PenaltyBreakdown* breakdown = nullptr) {
  Tape& tape = prm.tape;
  Scalar weight_sum = tape.constant(0.0);
  if (weight_on) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      for (int r = 0; r < net.weights[l].rows; ++r)
        for (int c = 0; c < net.weights[l].cols; ++c) {
          if (!net.weight_mask[l].at(r, c)) continue;
          const double d = euclidean_distance(net.coords[l][c], net.coords[l + 1][r]);
          weight_sum = madd(weight_sum, tape.constant(d), abs(prm.weight(l, r, c)));
        }
    }
  }
  Scalar bias_sum = tape.constant(0.0);
  if (bias_on) {
    for (std::size_t l = 0; l < net.biases.size(); ++l)
      for (std::size_t i = 0; i < net.biases[l].size(); ++i)
        if (net.bias_mask[l][i]) bias_sum = bias_sum + abs(prm.bias(l, static_cast<int>(i)));
  }
  Scalar total = tape.constant(lambda) * (weight_sum + bias_sum);
  if (breakdown != nullptr)
    *breakdown = PenaltyBreakdown{weight_sum.value(), bias_sum.value(), lambda};
  return total;
}

namespace detail {

// Exact change of the weight term if units (layer, s) and (layer, s2) were
// exchanged; positive means the exchange reduces the term. Only edges
// incident to the two slots move, and with A = 0 every distance difference
// is exactly zero, so no swap is ever reported as improving.
inline double swap_gain(const GeometricNetwork& net, int layer, int s, int s2) {
  const Grid<double>& win = net.weights[layer - 1];
  const Grid<double>& wout = net.weights[layer];
  const auto& in_coords = net.coords[layer - 1];
  const auto& out_coords = net.coords[layer + 1];
  const Point ps = net.coords[layer][s];
  const Point ps2 = net.coords[layer][s2];
  double gain = 0.0;
  for (int c = 0; c < win.cols; ++c) {
    const double dd = euclidean_distance(in_coords[c], ps) -
                      euclidean_distance(in_coords[c], ps2);
    gain += dd * (std::fabs(win.at(s, c)) - std::fabs(win.at(s2, c)));
  }
  for (int r = 0; r < wout.rows; ++r) {
    const double dd = euclidean_distance(ps, out_coords[r]) -
                      euclidean_distance(ps2, out_coords[r]);
    gain += dd * (std::fabs(wout.at(r, s)) - std::fabs(wout.at(r, s2)));
  }
  return gain;
}

}  // namespace detail

// Greedy locality-improving swaps. Per hidden layer, units are ranked by
// importance (descending, ties broken by slot index); each candidate in rank
// order is offered every exchange within the layer and the single strictly
// improving exchange with the largest reduction of the distance-weighted
// weight term is committed. Returns the number of committed swaps.
inline long try_swaps(GeometricNetwork& net, double /*lambda*/, bool /*bias_on*/) {
  long swaps = 0;
  for (int layer = 1; layer + 1 < net.num_layers(); ++layer) {
    const int n = net.layer_size(layer);
    if (n < 2) continue;
    const std::vector<double> imp = importance(net, layer);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return imp[a] > imp[b]; });
    // order[] names units by their slot at ranking time; track where each
    // unit currently sits as committed swaps move them around.
    std::vector<int> slot_of(n);
    std::iota(slot_of.begin(), slot_of.end(), 0);
    std::vector<int> unit_at(n);
    std::iota(unit_at.begin(), unit_at.end(), 0);
    for (int unit : order) {
      const int s = slot_of[unit];
      double best_gain = 0.0;
      int best_slot = -1;
      for (int s2 = 0; s2 < n; ++s2) {
        if (s2 == s) continue;
        const double gain = detail::swap_gain(net, layer, s, s2);
        if (gain > best_gain) {
          best_gain = gain;
          best_slot = s2;
        }
      }
      if (best_slot >= 0) {
        swap_units(net, layer, s, best_slot);
        const int other = unit_at[best_slot];
        std::swap(unit_at[s], unit_at[best_slot]);
        slot_of[unit] = best_slot;
        slot_of[other] = s;
        ++swaps;
      }
    }
  }
  return swaps;
}

}  // namespace bipinn

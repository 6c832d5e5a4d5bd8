#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bipinn/autodiff.hpp"
#include "bipinn/network.hpp"
#include "bipinn/rng.hpp"

// Differential-equation catalog: residuals, boundary conditions, collocation
// sampling, and closed-form solution oracles.

namespace bipinn {

enum class ProblemKind { PoissonHarmonic, Logistic };

struct BoundaryCondition {
  double t = 0.0;
  double value = 0.0;
};

// Either the 1D Poisson problem x'' = sum_k c_k sin(k t) on [0, 2*pi] with
// x(0) = x(2*pi) = 0, or the logistic ODE x' = r x (1 - x) with x(t_lo) = x0.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::PoissonHarmonic;
  std::vector<double> coefficients = {1.0, 4.0, 9.0, 16.0};  // c_k, k = 1..K
  double logistic_rate = 1.0;
  double logistic_x0 = 0.5;
  double t_lo = 0.0;
  double t_hi = 2.0 * std::numbers::pi;

  static ProblemSpec poisson(std::vector<double> coeffs) {
    ProblemSpec s;
    s.kind = ProblemKind::PoissonHarmonic;
    s.coefficients = std::move(coeffs);
    s.t_lo = 0.0;
    s.t_hi = 2.0 * std::numbers::pi;
    return s;
  }

  static ProblemSpec logistic(double rate = 1.0, double x0 = 0.5, double t_hi = 5.0) {
    ProblemSpec s;
    s.kind = ProblemKind::Logistic;
    s.logistic_rate = rate;
    s.logistic_x0 = x0;
    s.t_lo = 0.0;
    s.t_hi = t_hi;
    return s;
  }

  std::vector<BoundaryCondition> boundary_conditions() const {
    if (kind == ProblemKind::PoissonHarmonic)
      return {{t_lo, 0.0}, {t_hi, 0.0}};
    return {{t_lo, logistic_x0}};
  }

  // Source term of the Poisson problem, sum_k c_k sin(k t).
  double source(double t) const {
    double s = 0.0;
    for (std::size_t k = 0; k < coefficients.size(); ++k)
      s += coefficients[k] * std::sin(static_cast<double>(k + 1) * t);
    return s;
  }
};

struct CollocationSet {
  std::vector<double> interior;
  std::vector<std::vector<double>> boundary;  // aligned with boundary_conditions()
  std::vector<double> test;                   // uniform grid incl. endpoints
};

// Interior points are drawn uniformly from the open domain once and reused
// for the whole run; boundary samples split evenly across the problem's
// endpoints; the test grid is uniform and endpoint-inclusive.
inline CollocationSet sample_collocation(const ProblemSpec& spec, int n_interior,
                                         int n_boundary, int n_test, std::uint64_t seed) {
  if (n_interior <= 0 || n_boundary <= 0 || n_test <= 1)
    throw std::invalid_argument("collocation counts must be positive (test >= 2)");
  const auto bcs = spec.boundary_conditions();
  if (bcs.size() == 2 && n_boundary % 2 != 0)
    throw std::invalid_argument("boundary count must be even for two-endpoint problems");

  CollocationSet cs;
  Rng rng(seed);
  cs.interior.reserve(n_interior);
  for (int i = 0; i < n_interior; ++i)
    cs.interior.push_back(rng.uniform_open(spec.t_lo, spec.t_hi));

  const int per_bc = n_boundary / static_cast<int>(bcs.size());
  for (const auto& bc : bcs) cs.boundary.emplace_back(per_bc, bc.t);

  cs.test.reserve(n_test);
  const double step = (spec.t_hi - spec.t_lo) / (n_test - 1);
  for (int i = 0; i < n_test; ++i) cs.test.push_back(spec.t_lo + step * i);
  cs.test.back() = spec.t_hi;
  return cs;
}

// Equation residual at a collocation point, generic over Scalar/double jets.
template <class Num>
Num residual(const ProblemSpec& spec, const Jet<Num>& jet, double t) {
  if (spec.kind == ProblemKind::PoissonHarmonic)
    return jet.ddu - constant_like(jet.ddu, spec.source(t));
  const Num one = constant_like(jet.u, 1.0);
  const Num rate = constant_like(jet.u, spec.logistic_rate);
  return jet.du - rate * jet.u * (one - jet.u);
}

template <class Num>
Num boundary_residual(const ProblemSpec& spec, const Num& value, int which) {
  const auto bcs = spec.boundary_conditions();
  if (which < 0 || which >= static_cast<int>(bcs.size()))
    throw std::out_of_range("boundary condition index");
  return value - constant_like(value, bcs[which].value);
}

// Closed-form solutions. For the harmonic Poisson problem, integrating the
// source twice gives x(t) = -sum_k (c_k / k^2) sin(k t), which meets both
// homogeneous boundary conditions for any coefficients.
inline double analytic_solution(const ProblemSpec& spec, double t) {
  if (spec.kind == ProblemKind::PoissonHarmonic) {
    double s = 0.0;
    for (std::size_t i = 0; i < spec.coefficients.size(); ++i) {
      const double k = static_cast<double>(i + 1);
      s -= spec.coefficients[i] / (k * k) * std::sin(k * t);
    }
    return s;
  }
  // Logistic sigmoid curve through (t_lo, x0), written to stay stable for
  // large r t.
  const double x0 = spec.logistic_x0;
  const double e = std::exp(-spec.logistic_rate * (t - spec.t_lo));
  return 1.0 / (1.0 + (1.0 - x0) / x0 * e);
}

struct ErrorReport {
  double mse = 0.0;
  double euclidean = 0.0;  // l2 norm of the pointwise error over the test grid
};

template <class Model>
ErrorReport test_error(const Model& net, const ProblemSpec& spec,
                       const CollocationSet& colloc) {
  double sq = 0.0;
  for (double t : colloc.test) {
    const double e = forward_value(net, t) - analytic_solution(spec, t);
    sq += e * e;
  }
  return ErrorReport{sq / static_cast<double>(colloc.test.size()), std::sqrt(sq)};
}

}  // namespace bipinn

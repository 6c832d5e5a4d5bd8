#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bipinn/autodiff.hpp"

namespace bipinn {

enum class Activation { SinLU, Tanh, Identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::SinLU: return "sinlu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "sinlu") return Activation::SinLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation: " + s);
}

// a, a', a'' of the activation, written in terms of the primitive tape ops so
// that when Num = Scalar the reverse sweep differentiates through all three
// components (the loss depends on a' and a'' via the jet chain).
//
// sinLU: a(x) = x sin(x) sigmoid(x). With p = x sin x and s = sigmoid(x):
//   p'  = sin x + x cos x          s'  = s (1 - s)
//   p'' = 2 cos x - x sin x        s'' = s'(1 - 2s)
//   a   = p s
//   a'  = p' s + p s'
//   a'' = p'' s + 2 p' s' + p s''
template <class Num>
std::array<Num, 3> activation_eval2(Activation kind, const Num& x) {
  switch (kind) {
    case Activation::SinLU: {
      const Num one = constant_like(x, 1.0);
      const Num two = constant_like(x, 2.0);
      Num s = sigmoid(x);
      auto [sx, cx] = sin_cos(x);
      Num p = x * sx;
      Num p1 = madd(sx, x, cx);
      Num p2 = two * cx - p;
      Num s1 = s * (one - s);
      Num s2 = s1 * (one - two * s);
      Num a = p * s;
      Num a1 = madd(p1 * s, p, s1);
      Num a2 = madd(madd(p2 * s, two, p1 * s1), p, s2);
      return {a, a1, a2};
    }
    case Activation::Tanh: {
      // tanh x = 2 sigmoid(2x) - 1, keeping the expression within the
      // primitive op set.
      const Num one = constant_like(x, 1.0);
      const Num two = constant_like(x, 2.0);
      Num th = two * sigmoid(two * x) - one;
      Num a1 = one - square(th);
      Num a2 = -(two * (th * a1));
      return {th, a1, a2};
    }
    case Activation::Identity:
      return {x, constant_like(x, 1.0), constant_like(x, 0.0)};
  }
  throw std::invalid_argument("unknown activation kind");
}

// Value-only evaluation for plain forward passes. Deliberately written
// independently of activation_eval2 (std::tanh here, the sigmoid identity
// there) so the two routes cross-check each other in tests.
inline double activation_value(Activation kind, double x) {
  switch (kind) {
    case Activation::SinLU: return x * std::sin(x) * detail::stable_sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::Identity: return x;
  }
  throw std::invalid_argument("unknown activation kind");
}

inline Scalar activation_value(Activation kind, const Scalar& x) {
  switch (kind) {
    case Activation::SinLU: return x * sin(x) * sigmoid(x);
    case Activation::Tanh: {
      const Scalar one = constant_like(x, 1.0);
      const Scalar two = constant_like(x, 2.0);
      return two * sigmoid(two * x) - one;
    }
    case Activation::Identity: return x;
  }
  throw std::invalid_argument("unknown activation kind");
}

}  // namespace bipinn

#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

// Scalar reverse-mode tape plus second-order forward jets.
//
// Every differentiable quantity is a Scalar: a handle onto a node of a Tape.
// Recording an operation appends a node carrying the ids of its (at most two)
// parents and the local partial derivatives evaluated at record time, so a
// single reverse sweep over the node list yields exact adjoints for every
// leaf. Jets carry (value, d/dt, d2/dt2) with respect to the input coordinate
// through the same Scalar arithmetic; parameter gradients of expressions that
// contain jet components therefore come out of the ordinary reverse sweep.

namespace bipinn {

class Tape;

struct Scalar {
  Tape* tape = nullptr;
  std::uint32_t id = 0;
  double v = 0.0;

  double value() const { return v; }
};

enum class BinaryOp { Add, Sub, Mul, Div };
enum class UnaryOp { Neg, Sin, Cos, Exp, Square, Sigmoid, Abs };

// Adjoints of a single backward sweep, indexed by node id. Nodes the root
// does not depend on keep an adjoint of exactly 0.
struct Gradients {
  std::vector<double> adjoint;

  double at(const Scalar& s) const {
    assert(s.id < adjoint.size());
    return adjoint[s.id];
  }
};

class Tape {
 public:
  Scalar variable(double value) { return leaf(value); }

  // Structurally a leaf; kept separate from variable() in the API to mark
  // quantities whose adjoints are never read. Repeated values are interned
  // through a small cache so hot loops do not grow the tape with duplicate
  // leaves.
  Scalar constant(double value) {
    for (const auto& [v, id] : const_cache_)
      if (v == value) return Scalar{this, id, value};
    const Scalar s = leaf(value);
    if (const_cache_.size() < kConstCacheCap) const_cache_.push_back({value, s.id});
    return s;
  }

  Scalar record(std::uint32_t p0, std::uint32_t p1, double d0, double d1,
                double value) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{p0, p1, id, d0, d1, 0.0});
    return Scalar{this, id, value};
  }

  // Three-parent node, used by the fused multiply-add.
  Scalar record3(std::uint32_t p0, std::uint32_t p1, std::uint32_t p2, double d0,
                 double d1, double d2, double value) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{p0, p1, p2, d0, d1, d2});
    return Scalar{this, id, value};
  }

  // Reverse sweep from root. The tape itself is untouched, so backward can
  // be run repeatedly and from several roots.
  Gradients backward(const Scalar& root) const {
    Gradients g;
    backward_into(root, g.adjoint);
    return g;
  }

  // Same sweep writing into a caller-owned buffer, for hot loops that want
  // to reuse the allocation.
  void backward_into(const Scalar& root, std::vector<double>& adjoint) const {
    assert(root.tape == this);
    adjoint.assign(nodes_.size(), 0.0);
    adjoint[root.id] = 1.0;
    for (std::uint32_t i = root.id;; --i) {
      const double a = adjoint[i];
      if (a != 0.0) {
        const Node& n = nodes_[i];
        adjoint[n.p0] += n.d0 * a;
        adjoint[n.p1] += n.d1 * a;
        adjoint[n.p2] += n.d2 * a;
      }
      if (i == 0) break;
    }
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    const_cache_.clear();
  }

  // Drops every node recorded after the watermark. Lets a caller keep a
  // fixed prefix (parameter leaves, shared constants) while re-recording the
  // varying tail once per collocation point.
  void truncate(std::size_t watermark) {
    assert(watermark <= nodes_.size());
    nodes_.resize(watermark);
    std::erase_if(const_cache_, [&](const auto& e) { return e.second >= watermark; });
  }

  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  struct Node {
    std::uint32_t p0, p1, p2;
    double d0, d1, d2;
  };
  static constexpr std::size_t kConstCacheCap = 8;

  Scalar leaf(double value) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{id, id, id, 0.0, 0.0, 0.0});
    return Scalar{this, id, value};
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<double, std::uint32_t>> const_cache_;
};

namespace detail {
inline Tape* same_tape(const Scalar& a, const Scalar& b) {
  assert(a.tape != nullptr && a.tape == b.tape);
  return a.tape;
}
inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace detail

inline Scalar operator+(const Scalar& a, const Scalar& b) {
  return detail::same_tape(a, b)->record(a.id, b.id, 1.0, 1.0, a.v + b.v);
}
inline Scalar operator-(const Scalar& a, const Scalar& b) {
  return detail::same_tape(a, b)->record(a.id, b.id, 1.0, -1.0, a.v - b.v);
}
inline Scalar operator*(const Scalar& a, const Scalar& b) {
  return detail::same_tape(a, b)->record(a.id, b.id, b.v, a.v, a.v * b.v);
}
inline Scalar operator/(const Scalar& a, const Scalar& b) {
  Tape* t = detail::same_tape(a, b);
  if (b.v == 0.0) throw std::domain_error("Scalar division by zero");
  const double inv = 1.0 / b.v;
  return t->record(a.id, b.id, inv, -a.v * inv * inv, a.v * inv);
}
inline Scalar operator-(const Scalar& x) {
  return x.tape->record(x.id, x.id, -1.0, 0.0, -x.v);
}

inline Scalar sin(const Scalar& x) {
  return x.tape->record(x.id, x.id, std::cos(x.v), 0.0, std::sin(x.v));
}
inline Scalar cos(const Scalar& x) {
  return x.tape->record(x.id, x.id, -std::sin(x.v), 0.0, std::cos(x.v));
}
inline Scalar exp(const Scalar& x) {
  const double e = std::exp(x.v);
  return x.tape->record(x.id, x.id, e, 0.0, e);
}
inline Scalar square(const Scalar& x) {
  return x.tape->record(x.id, x.id, 2.0 * x.v, 0.0, x.v * x.v);
}
inline Scalar sigmoid(const Scalar& x) {
  const double s = detail::stable_sigmoid(x.v);
  return x.tape->record(x.id, x.id, s * (1.0 - s), 0.0, s);
}
// Subgradient convention: sign(0) = 0, so a weight sitting exactly at zero
// receives no L1 push.
inline Scalar abs(const Scalar& x) {
  return x.tape->record(x.id, x.id, detail::sign(x.v), 0.0, std::fabs(x.v));
}

// Fused a + b*c. One node instead of a mul/add pair on the hot path.
inline Scalar madd(const Scalar& a, const Scalar& b, const Scalar& c) {
  Tape* t = detail::same_tape(a, b);
  assert(c.tape == t);
  return t->record3(a.id, b.id, c.id, 1.0, c.v, b.v, a.v + b.v * c.v);
}
inline double madd(double a, double b, double c) { return a + b * c; }

// Plain-double counterparts so numeric kernels can be written once and
// instantiated for either Scalar or double.
inline double square(double x) { return x * x; }
inline double sigmoid(double x) { return detail::stable_sigmoid(x); }
inline double abs(double x) { return std::fabs(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double exp(double x) { return std::exp(x); }

namespace detail {
inline void sincos_both(double x, double& s, double& c) {
#if defined(__GLIBC__)
  ::sincos(x, &s, &c);
#else
  s = std::sin(x);
  c = std::cos(x);
#endif
}
}  // namespace detail

// Fused sine/cosine of the same argument (one libm call where available).
inline std::pair<double, double> sin_cos(double x) {
  double s, c;
  detail::sincos_both(x, s, c);
  return {s, c};
}
inline std::pair<Scalar, Scalar> sin_cos(const Scalar& x) {
  double s, c;
  detail::sincos_both(x.v, s, c);
  return {x.tape->record(x.id, x.id, c, 0.0, s), x.tape->record(x.id, x.id, -s, 0.0, c)};
}

inline Scalar binary(BinaryOp op, const Scalar& a, const Scalar& b) {
  switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div: return a / b;
  }
  throw std::invalid_argument("unknown binary op");
}

inline Scalar unary(UnaryOp op, const Scalar& x) {
  switch (op) {
    case UnaryOp::Neg: return -x;
    case UnaryOp::Sin: return sin(x);
    case UnaryOp::Cos: return cos(x);
    case UnaryOp::Exp: return exp(x);
    case UnaryOp::Square: return square(x);
    case UnaryOp::Sigmoid: return sigmoid(x);
    case UnaryOp::Abs: return abs(x);
  }
  throw std::invalid_argument("unknown unary op");
}

inline Gradients backward(const Scalar& root) { return root.tape->backward(root); }

// Value-constant of the same numeric kind as an exemplar expression node.
inline double constant_like(double, double v) { return v; }
inline Scalar constant_like(const Scalar& x, double v) { return x.tape->constant(v); }

// (value, first, second derivative) with respect to the input coordinate.
template <class Num>
struct Jet {
  Num u, du, ddu;
};

inline Jet<double> jet_seed(double t) { return Jet<double>{t, 1.0, 0.0}; }
inline Jet<Scalar> jet_seed(Tape& tape, double t) {
  return Jet<Scalar>{tape.constant(t), tape.constant(1.0), tape.constant(0.0)};
}

// Second-order chain rule: given (a, a', a'') evaluated at z.u, produce the
// jet of a(z(t)): (a, a'.du, a''.du^2 + a'.ddu).
template <class Num>
Jet<Num> jet_chain(const std::array<Num, 3>& a, const Jet<Num>& z) {
  return Jet<Num>{a[0], a[1] * z.du, madd(a[2] * square(z.du), a[1], z.ddu)};
}

}  // namespace bipinn

#pragma once

#include <algorithm>
#include <cmath>

namespace mergeopf {

struct HuberParams {
  double delta = 0.05;  // quadratic/linear breakpoint, > 0
};

// Manhattan deviation.
inline double l1(double x) { return std::abs(x); }

// Sum-of-squares deviation; spreads corrections over many variables.
inline double l2(double x) { return x * x; }
inline double l2_grad(double x) { return 2.0 * x; }

// Quadratic for |x| <= delta, linear beyond; the x^2/2 scaling makes the
// linear slope exactly delta.
inline double huber(double x, HuberParams p) {
  const double a = std::abs(x);
  return a <= p.delta ? 0.5 * x * x : p.delta * (a - 0.5 * p.delta);
}

inline double huber_grad(double x, HuberParams p) {
  if (std::abs(x) <= p.delta) return x;
  return x > 0.0 ? p.delta : -p.delta;
}

// Sum of two Huber penalties around the targets a and b (order-insensitive).
// For |a - b| >= 2 delta the value is constant and minimal on
// [min(a,b) + delta, max(a,b) - delta].
inline double double_huber(double x, double a, double b, HuberParams p) {
  return huber(x - a, p) + huber(x - b, p);
}

inline double double_huber_grad(double x, double a, double b, HuberParams p) {
  return huber_grad(x - a, p) + huber_grad(x - b, p);
}

// Global minimum value of the double-Huber (attained on the inter-target
// plateau when it exists, at the midpoint otherwise).
inline double double_huber_min(double a, double b, HuberParams p) {
  const double gap = std::abs(a - b);
  if (gap >= 2.0 * p.delta) return p.delta * (gap - p.delta);
  return 2.0 * huber(0.5 * gap, p);
}

// Maximum of the double-Huber over [lo, hi]; the function is convex, so the
// maximum sits at an endpoint.
inline double double_huber_interval_max(double a, double b, HuberParams p, double lo, double hi) {
  return std::max(double_huber(lo, a, b, p), double_huber(hi, a, b, p));
}

enum class PenaltyKind { L1Smooth, L2, Huber, DoubleHuber };

struct PenaltyParams {
  HuberParams huber;
  double target_a = 0.0;  // DoubleHuber only
  double target_b = 0.0;
};

inline double penalty_value(PenaltyKind kind, double x, const PenaltyParams& p) {
  switch (kind) {
    case PenaltyKind::L1Smooth: return l1(x);
    case PenaltyKind::L2: return l2(x);
    case PenaltyKind::Huber: return huber(x, p.huber);
    case PenaltyKind::DoubleHuber: return double_huber(x, p.target_a, p.target_b, p.huber);
  }
  return 0.0;
}

// Analytic derivative of penalty_value. The L1 variant reports the
// subgradient sign(x) (0 at the kink) and exists for diagnostics only; the
// solver handles exact L1 terms by slack splitting instead.
inline double penalty_grad(PenaltyKind kind, double x, const PenaltyParams& p) {
  switch (kind) {
    case PenaltyKind::L1Smooth: return x == 0.0 ? 0.0 : (x > 0.0 ? 1.0 : -1.0);
    case PenaltyKind::L2: return l2_grad(x);
    case PenaltyKind::Huber: return huber_grad(x, p.huber);
    case PenaltyKind::DoubleHuber: return double_huber_grad(x, p.target_a, p.target_b, p.huber);
  }
  return 0.0;
}

}  // namespace mergeopf

#pragma once

#include <cmath>

namespace impact {

// First-order forward-mode scalar: value plus one directional derivative.
// Used to push a tangent through the hand-written gradient code, which
// yields exact Hessian-vector products (forward-over-reverse).
struct Dual {
    double v = 0.0;
    double d = 0.0;

    Dual() = default;
    Dual(double value) : v(value) {}
    Dual(double value, double deriv) : v(value), d(deriv) {}

    Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
    Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
    Dual& operator*=(const Dual& o) {
        d = d * o.v + v * o.d;
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        d = (d * o.v - v * o.d) / (o.v * o.v);
        v /= o.v;
        return *this;
    }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

// Branch decisions (ReLU masks, hinge saturation, abs sign) are taken on
// the primal value so the tangent follows the same linearization as the
// reverse pass.
inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

inline double make_scalar(double v, double /*tangent*/, double* /*tag*/) { return v; }

inline Dual relu(const Dual& x) { return x.v > 0.0 ? x : Dual{0.0, 0.0}; }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace impact

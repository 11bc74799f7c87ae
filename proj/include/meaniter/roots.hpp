#pragma once

#include <string>
#include <utility>

#include "meaniter/real.hpp"

namespace meaniter::roots {

/// Bracket width (relative to the larger endpoint magnitude) at which a
/// solver stops: four units in the last place.
inline Real stop_width(const Real& a, const Real& b, bits_t bits)
{
    Real scale = max(abs(a), abs(b));
    if (scale.is_zero())
        scale = Real(1L, bits);
    return ldexp(scale, 2 - bits);
}

/// Solves f(x) = target on [lo, hi] for monotone f with derivative df.
/// Newton steps are taken while they stay inside the current bracket and
/// halve the residual fast enough; otherwise the step is a bisection.
template <class F, class DF>
Real newton_bisect(F&& f, DF&& df, const Real& target, const Real& lo, const Real& hi)
{
    bits_t bits = std::max({lo.precision(), hi.precision(), target.precision()});
    Real flo = f(lo) - target;
    if (flo.is_zero())
        return lo;
    Real fhi = f(hi) - target;
    if (fhi.is_zero())
        return hi;
    if (flo.sign() == fhi.sign())
        throw bracket_error("no sign change on [" + lo.to_string(12) + ", " + hi.to_string(12) +
                            "]; the function is not monotone or the target is outside its range");

    // xl carries a negative residual, xh a positive one.
    Real xl = flo.sign() < 0 ? lo : hi;
    Real xh = flo.sign() < 0 ? hi : lo;
    Real x = (lo + hi) / 2L;
    Real dx_old = abs(hi - lo);
    Real dx = dx_old;
    Real fx = f(x) - target;
    Real dfx = df(x);
    const Real tol = stop_width(lo, hi, bits);

    for (long iter = 0; iter < 4 * bits + 64; ++iter) {
        if (fx.is_zero())
            return x;
        bool newton_ok = !dfx.is_zero() &&
                         ((x - xh) * dfx - fx) * ((x - xl) * dfx - fx) < 0L &&
                         abs(2L * fx) <= abs(dx_old * dfx);
        if (newton_ok) {
            dx_old = dx;
            dx = fx / dfx;
            x -= dx;
        } else {
            dx_old = dx;
            dx = (xh - xl) / 2L;
            x = xl + dx;
        }
        if (abs(dx) <= tol)
            return x;
        fx = f(x) - target;
        dfx = df(x);
        if (fx < 0L)
            xl = x;
        else
            xh = x;
        if (abs(xh - xl) <= tol)
            return fx.is_zero() ? x : (xl + xh) / 2L;
    }
    throw convergence_error("Newton/bisection did not converge within the iteration budget");
}

/// Root of a function decreasing through zero on [lo, hi], f(lo) > 0 >
/// f(hi). Bisection until the bracket is below 2^-64 of its scale, then
/// Illinois steps (regula falsi with halving of the stale endpoint) to
/// full precision.
template <class F>
Real bisect_illinois(F&& f, const Real& lo, const Real& hi)
{
    bits_t bits = std::max(lo.precision(), hi.precision());
    Real a = lo, b = hi;
    Real fa = f(a), fb = f(b);
    if (fa.is_zero())
        return a;
    if (fb.is_zero())
        return b;
    if (!(fa > 0L && fb < 0L))
        throw bracket_error("expected a positive value at " + lo.to_string(12) +
                            " and a negative one at " + hi.to_string(12));

    const Real coarse = ldexp(max(max(abs(a), abs(b)), b - a), -64);
    const Real tol = stop_width(a, b, bits);

    while (b - a > coarse) {
        Real m = (a + b) / 2L;
        Real fm = f(m);
        if (fm.is_zero())
            return m;
        if (fm > 0L) {
            a = std::move(m);
            fa = std::move(fm);
        } else {
            b = std::move(m);
            fb = std::move(fm);
        }
    }

    // Illinois on the bracket (a, b); `side` remembers which end moved last.
    int side = 0;
    for (int iter = 0; iter < 256; ++iter) {
        if (b - a <= tol)
            break;
        Real c = b - fb * (b - a) / (fb - fa);
        if (!(c > a && c < b))
            c = (a + b) / 2L;
        Real fc = f(c);
        if (fc.is_zero())
            return c;
        if (fc > 0L) {
            a = std::move(c);
            fa = std::move(fc);
            if (side == 1)
                fb = fb / 2L;
            side = 1;
        } else {
            b = std::move(c);
            fb = std::move(fc);
            if (side == -1)
                fa = fa / 2L;
            side = -1;
        }
    }
    while (b - a > tol) {
        Real m = (a + b) / 2L;
        Real fm = f(m);
        if (fm.is_zero())
            return m;
        (fm > 0L ? a : b) = std::move(m);
    }
    return (a + b) / 2L;
}

} // namespace meaniter::roots

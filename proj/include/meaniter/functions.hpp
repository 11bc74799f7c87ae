#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "meaniter/param.hpp"
#include "meaniter/real.hpp"

namespace meaniter {

using UnaryFn = std::function<Real(const Real&)>;
using BinaryFn = std::function<Real(const Real&, const Real&)>;

namespace detail {

constexpr int spot_check_points = 64;
constexpr bits_t spot_check_bits = 128;

/// 2^e for e evenly spread over [-5, 5].
inline Real exp2_grid(int k, int n, bits_t bits)
{
    double e = (k + 0.5 - n / 2.0) * (10.0 / n);
    return Real::from_double(std::exp2(e), bits);
}

} // namespace detail

/// Points strictly inside `dom` used to spot-check axioms: evenly spaced on
/// a bounded interval, geometric near a finite end of a half line, and
/// evenly spaced on [-8, 8] for the whole line.
inline std::vector<Real> sample_grid(const Interval& dom, int n = detail::spot_check_points,
                                     bits_t bits = detail::spot_check_bits)
{
    std::vector<Real> pts;
    pts.reserve(n);
    for (int k = 0; k < n; ++k) {
        Real t = Real(2 * k + 1, bits) / (2L * n);
        if (std::isfinite(dom.lo) && std::isfinite(dom.hi)) {
            Real lo = Real::from_double(dom.lo, bits), hi = Real::from_double(dom.hi, bits);
            pts.push_back(lo + (hi - lo) * t);
        } else if (std::isfinite(dom.lo)) {
            pts.push_back(Real::from_double(dom.lo, bits) + detail::exp2_grid(k, n, bits));
        } else if (std::isfinite(dom.hi)) {
            pts.push_back(Real::from_double(dom.hi, bits) - detail::exp2_grid(n - 1 - k, n, bits));
        } else {
            pts.push_back(Real(16L, bits) * t - 8L);
        }
    }
    return pts;
}

/// Strictly monotone C² function of one variable with its first two
/// derivatives. Construction spot-checks monotonicity and a nonvanishing
/// first derivative on a 64-point grid; the callbacks must be pure.
class GeneratorFunction
{
public:
    /// With require_monotone = false the function is only carried along
    /// with its derivatives, as the two halves of a Bajraktarević pair are.
    GeneratorFunction(std::string name, UnaryFn eval, UnaryFn d1, UnaryFn d2,
                      Interval domain = Interval::real_line(), bool require_monotone = true)
        : name_(std::move(name)), eval_(std::move(eval)), d1_(std::move(d1)), d2_(std::move(d2)),
          domain_(domain), monotone_(require_monotone)
    {
        domain_.validate();
        if (monotone_)
            validate();
    }

    Real operator()(const Real& x) const { return eval_(x); }
    Real d1(const Real& x) const { return d1_(x); }
    Real d2(const Real& x) const { return d2_(x); }

    const std::string& name() const { return name_; }
    const Interval& domain() const { return domain_; }
    /// +1 for increasing, -1 for decreasing, 0 when monotonicity was not required.
    int direction() const { return direction_; }
    bool strictly_monotone() const { return monotone_; }

private:
    void validate()
    {
        auto grid = sample_grid(domain_);
        Real prev = eval_(grid.front());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (d1_(grid[i]).is_zero())
                throw axiom_error("generator '" + name_ + "' has a vanishing derivative at " +
                                  grid[i].to_string(8));
            if (i == 0)
                continue;
            Real cur = eval_(grid[i]);
            int dir = cur > prev ? 1 : cur < prev ? -1 : 0;
            if (dir == 0 || (direction_ != 0 && dir != direction_))
                throw axiom_error("generator '" + name_ + "' is not strictly monotone near " +
                                  grid[i].to_string(8));
            direction_ = dir;
            prev = std::move(cur);
        }
    }

    std::string name_;
    UnaryFn eval_, d1_, d2_;
    Interval domain_;
    bool monotone_ = true;
    int direction_ = 0;
};

/// Quasideviation E(x, u) with ∂₁E and ∂₁²E. The u-partials are not needed
/// by any formula and are not stored. Construction spot-checks the sign
/// condition sign E(x,u) = sign(x−u) and E(x,x) = 0 on a grid.
class DeviationFunction
{
public:
    DeviationFunction(std::string name, BinaryFn eval, BinaryFn d1, BinaryFn d11,
                      Interval domain = Interval::real_line())
        : name_(std::move(name)), eval_(std::move(eval)), d1_(std::move(d1)),
          d11_(std::move(d11)), domain_(domain)
    {
        domain_.validate();
        validate();
    }

    Real operator()(const Real& x, const Real& u) const { return eval_(x, u); }
    Real d1(const Real& x, const Real& u) const { return d1_(x, u); }
    Real d11(const Real& x, const Real& u) const { return d11_(x, u); }

    const std::string& name() const { return name_; }
    const Interval& domain() const { return domain_; }

private:
    void validate() const
    {
        auto grid = sample_grid(domain_, 16);
        PrecisionConfig cfg{detail::spot_check_bits, 32};
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Real& x = grid[i];
            Real scale(1L, detail::spot_check_bits);
            for (std::size_t j = 0; j < grid.size(); ++j) {
                if (i == j)
                    continue;
                Real e = eval_(x, grid[j]);
                int want = i > j ? 1 : -1;
                if (e.sign() != want)
                    throw axiom_error("deviation '" + name_ + "' violates sign E(x,u)=sign(x-u) at (" +
                                      x.to_string(8) + ", " + grid[j].to_string(8) + ")");
                scale = max(scale, abs(e));
            }
            if (!effectively_zero(eval_(x, x), scale, cfg))
                throw axiom_error("deviation '" + name_ + "' does not vanish on the diagonal at " +
                                  x.to_string(8));
        }
    }

    std::string name_;
    BinaryFn eval_, d1_, d11_;
    Interval domain_;
};

} // namespace meaniter

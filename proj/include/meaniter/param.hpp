#pragma once

#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "meaniter/real.hpp"

namespace meaniter {

/// A real parameter (Gini exponent, catalog coefficient) kept as decimal
/// text so it can be materialized exactly at whatever precision a
/// computation runs at.
class Param
{
public:
    Param(long v) : text_(std::to_string(v)), integer_(v) {}
    Param(int v) : Param(static_cast<long>(v)) {}

    /// Uses the shortest decimal that round-trips the double, so 0.1 means
    /// the decimal 0.1 and not its binary neighbour.
    Param(double v)
    {
        if (!std::isfinite(v))
            throw parse_error("parameter must be finite");
        if (v == std::trunc(v) && std::abs(v) < 1e15) {
            integer_ = static_cast<long>(v);
            text_ = std::to_string(*integer_);
            return;
        }
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        text_.assign(buf, res.ptr);
    }

    static Param parse(std::string_view text)
    {
        Real probe = Real::parse(text, 4096);
        Param p(0L);
        p.text_ = std::string(text);
        p.integer_.reset();
        if (mpfr_integer_p(probe.get()) && mpfr_fits_slong_p(probe.get(), MPFR_RNDN))
            p.integer_ = mpfr_get_si(probe.get(), MPFR_RNDN);
        return p;
    }

    Real value(bits_t bits) const
    {
        if (integer_)
            return Real(*integer_, bits);
        return Real::parse(text_, bits);
    }

    const std::optional<long>& as_integer() const { return integer_; }
    const std::string& text() const { return text_; }
    double approx() const { return integer_ ? static_cast<double>(*integer_) : std::stod(text_); }

    friend bool operator==(const Param& a, const Param& b)
    {
        if (a.integer_ || b.integer_)
            return a.integer_ == b.integer_;
        return Real::parse(a.text_, 4096) == Real::parse(b.text_, 4096);
    }

private:
    std::string text_;
    std::optional<long> integer_;
};

/// Open interval (lo, hi); either end may be infinite.
struct Interval
{
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    static Interval real_line() { return {}; }
    static Interval positive() { return {0.0, std::numeric_limits<double>::infinity()}; }

    void validate() const
    {
        if (!(lo < hi))
            throw std::invalid_argument("interval needs lo < hi");
    }

    bool contains(const Real& x) const
    {
        return x.is_finite() && compare(x, lo) > 0 && compare(x, hi) < 0;
    }

    bool subset_of(const Interval& o) const { return lo >= o.lo && hi <= o.hi; }

    /// Distance from x to the nearest endpoint (+inf if both are infinite).
    Real room(const Real& x) const
    {
        Real best = Real::infinity(x.precision(), 1);
        if (std::isfinite(lo))
            best = min(best, x - Real::from_double(lo, x.precision()));
        if (std::isfinite(hi))
            best = min(best, Real::from_double(hi, x.precision()) - x);
        return best;
    }

    friend Interval intersect(const Interval& a, const Interval& b)
    {
        Interval r{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
        if (!(r.lo < r.hi))
            throw domain_error("empty interval intersection");
        return r;
    }

    std::string to_string() const
    {
        auto end = [](double v) {
            if (std::isinf(v))
                return std::string(v < 0 ? "-inf" : "inf");
            char buf[64];
            auto res = std::to_chars(buf, buf + sizeof buf, v);
            return std::string(buf, res.ptr);
        };
        return "(" + end(lo) + ", " + end(hi) + ")";
    }

    friend bool operator==(const Interval&, const Interval&) = default;
};

} // namespace meaniter

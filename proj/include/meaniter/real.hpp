#pragma once

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "meaniter/errors.hpp"

namespace meaniter {

using bits_t = mpfr_prec_t;

/// Binary floating point number with its own precision, rounded to nearest.
///
/// A binary operation between two Reals runs at the larger of the two
/// precisions. Operations with a plain integer run at the Real's precision.
/// Values are immutable from the caller's point of view (compound assignment
/// rebinds), so sharing a Real across threads is safe.
class Real
{
public:
    static constexpr bits_t default_bits = 64;

    Real() : Real(0L, default_bits) {}

    Real(long v, bits_t bits)
    {
        mpfr_init2(v_, bits);
        mpfr_set_si(v_, v, MPFR_RNDN);
    }

    static Real from_double(double v, bits_t bits)
    {
        Real r(raw_tag{}, bits);
        mpfr_set_d(r.v_, v, MPFR_RNDN);
        return r;
    }

    /// Copy of an MPFR value at its own precision.
    static Real from_mpfr(mpfr_srcptr v)
    {
        Real r(raw_tag{}, mpfr_get_prec(v));
        mpfr_set(r.v_, v, MPFR_RNDN);
        return r;
    }

    /// Parses a decimal literal ("1", "-2.5e-3", "0.1") correctly rounded to
    /// `bits`. With `allow_infinite` the strings "inf", "+inf", "-inf" are
    /// accepted too; NaN never is.
    static Real parse(std::string_view text, bits_t bits, bool allow_infinite = false)
    {
        std::string s(text);
        if (s.empty())
            throw parse_error("empty decimal string");
        if (allow_infinite) {
            if (s == "inf" || s == "+inf")
                return infinity(bits, 1);
            if (s == "-inf")
                return infinity(bits, -1);
        }
        for (char c : s) {
            bool ok = (c >= '0' && c <= '9') || c == '.' || c == 'e' || c == 'E' || c == '+' ||
                      c == '-';
            if (!ok)
                throw parse_error("malformed decimal string '" + s + "'");
        }
        Real r(raw_tag{}, bits);
        if (mpfr_set_str(r.v_, s.c_str(), 10, MPFR_RNDN) != 0 || !mpfr_number_p(r.v_))
            throw parse_error("malformed decimal string '" + s + "'");
        return r;
    }

    static Real infinity(bits_t bits, int sign)
    {
        Real r(raw_tag{}, bits);
        mpfr_set_inf(r.v_, sign);
        return r;
    }

    /// 2^e exactly.
    static Real pow2(long e, bits_t bits)
    {
        Real r(1L, bits);
        mpfr_mul_2si(r.v_, r.v_, e, MPFR_RNDN);
        return r;
    }

    Real(const Real& o)
    {
        mpfr_init2(v_, mpfr_get_prec(o.v_));
        mpfr_set(v_, o.v_, MPFR_RNDN);
    }

    Real(Real&& o) noexcept
    {
        mpfr_init2(v_, MPFR_PREC_MIN);
        mpfr_swap(v_, o.v_);
    }

    Real& operator=(const Real& o)
    {
        if (this != &o) {
            mpfr_set_prec(v_, mpfr_get_prec(o.v_));
            mpfr_set(v_, o.v_, MPFR_RNDN);
        }
        return *this;
    }

    Real& operator=(Real&& o) noexcept
    {
        mpfr_swap(v_, o.v_);
        return *this;
    }

    ~Real() { mpfr_clear(v_); }

    bits_t precision() const { return mpfr_get_prec(v_); }

    /// Copy rounded (or exactly widened) to `bits`.
    Real with_precision(bits_t bits) const
    {
        Real r(raw_tag{}, bits);
        mpfr_set(r.v_, v_, MPFR_RNDN);
        return r;
    }

    mpfr_srcptr get() const { return v_; }

    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }

    bool is_zero() const { return mpfr_zero_p(v_) != 0; }
    bool is_finite() const { return mpfr_number_p(v_) != 0; }
    int sign() const { return mpfr_sgn(v_); }

    /// Binary exponent e with value = m·2^e, 0.5 <= |m| < 1. Zero maps to
    /// the smallest long.
    long exponent() const
    {
        if (!mpfr_regular_p(v_))
            return std::numeric_limits<long>::min();
        return mpfr_get_exp(v_);
    }

    /// Decimal text with `digits` significant digits, trailing zeros
    /// dropped, scientific notation for very large or small magnitudes.
    std::string to_string(int digits) const
    {
        char* buf = nullptr;
        mpfr_asprintf(&buf, "%.*RNg", std::max(digits, 1), v_);
        std::string s(buf);
        mpfr_free_str(buf);
        return s;
    }

    /// Enough digits that parsing the text back at this precision restores
    /// the value bit for bit.
    std::string to_string() const
    {
        return to_string(static_cast<int>(mpfr_get_str_ndigits(10, precision())));
    }

    Real operator-() const
    {
        Real r(raw_tag{}, precision());
        mpfr_neg(r.v_, v_, MPFR_RNDN);
        return r;
    }

    friend Real operator+(const Real& a, const Real& b) { return binary<mpfr_add>(a, b); }
    friend Real operator-(const Real& a, const Real& b) { return binary<mpfr_sub>(a, b); }
    friend Real operator*(const Real& a, const Real& b) { return binary<mpfr_mul>(a, b); }
    friend Real operator/(const Real& a, const Real& b)
    {
        if (b.is_zero())
            throw domain_error("division by exact zero");
        return binary<mpfr_div>(a, b);
    }

    friend Real operator+(const Real& a, long b) { return with_si<mpfr_add_si>(a, b); }
    friend Real operator+(long a, const Real& b) { return with_si<mpfr_add_si>(b, a); }
    friend Real operator-(const Real& a, long b) { return with_si<mpfr_sub_si>(a, b); }
    friend Real operator-(long a, const Real& b)
    {
        Real r(raw_tag{}, b.precision());
        mpfr_si_sub(r.v_, a, b.v_, MPFR_RNDN);
        return r;
    }
    friend Real operator*(const Real& a, long b) { return with_si<mpfr_mul_si>(a, b); }
    friend Real operator*(long a, const Real& b) { return with_si<mpfr_mul_si>(b, a); }
    friend Real operator/(const Real& a, long b)
    {
        if (b == 0)
            throw domain_error("division by exact zero");
        return with_si<mpfr_div_si>(a, b);
    }
    friend Real operator/(long a, const Real& b)
    {
        if (b.is_zero())
            throw domain_error("division by exact zero");
        Real r(raw_tag{}, b.precision());
        mpfr_si_div(r.v_, a, b.v_, MPFR_RNDN);
        return r;
    }

    Real& operator+=(const Real& b) { return *this = *this + b; }
    Real& operator-=(const Real& b) { return *this = *this - b; }
    Real& operator*=(const Real& b) { return *this = *this * b; }
    Real& operator/=(const Real& b) { return *this = *this / b; }

    friend bool operator==(const Real& a, const Real& b) { return mpfr_equal_p(a.v_, b.v_) != 0; }
    friend std::partial_ordering operator<=>(const Real& a, const Real& b)
    {
        if (mpfr_unordered_p(a.v_, b.v_))
            return std::partial_ordering::unordered;
        int c = mpfr_cmp(a.v_, b.v_);
        return c < 0 ? std::partial_ordering::less
               : c > 0 ? std::partial_ordering::greater
                       : std::partial_ordering::equivalent;
    }
    friend bool operator==(const Real& a, long b) { return mpfr_cmp_si(a.v_, b) == 0; }
    friend std::partial_ordering operator<=>(const Real& a, long b)
    {
        if (mpfr_nan_p(a.v_))
            return std::partial_ordering::unordered;
        int c = mpfr_cmp_si(a.v_, b);
        return c < 0 ? std::partial_ordering::less
               : c > 0 ? std::partial_ordering::greater
                       : std::partial_ordering::equivalent;
    }
    /// Three-way comparison against a double (which may be infinite).
    friend int compare(const Real& a, double b)
    {
        if (std::isinf(b))
            return b > 0 ? (mpfr_inf_p(a.v_) && a.sign() > 0 ? 0 : -1)
                         : (mpfr_inf_p(a.v_) && a.sign() < 0 ? 0 : 1);
        int c = mpfr_cmp_d(a.v_, b);
        return c < 0 ? -1 : c > 0 ? 1 : 0;
    }

    friend Real abs(const Real& a) { return unary<mpfr_abs>(a); }
    friend Real exp(const Real& a) { return unary<mpfr_exp>(a); }
    friend Real log(const Real& a)
    {
        if (a.sign() <= 0)
            throw domain_error("log of nonpositive argument " + a.to_string(12));
        return unary<mpfr_log>(a);
    }
    friend Real sqrt(const Real& a)
    {
        if (a.sign() < 0)
            throw domain_error("sqrt of negative argument " + a.to_string(12));
        return unary<mpfr_sqrt>(a);
    }
    friend Real pow(const Real& a, long n)
    {
        if (n < 0 && a.is_zero())
            throw domain_error("zero raised to a negative power");
        Real r(raw_tag{}, a.precision());
        mpfr_pow_si(r.v_, a.v_, n, MPFR_RNDN);
        return r;
    }
    friend Real pow(const Real& a, const Real& y)
    {
        if (mpfr_integer_p(y.v_) && mpfr_fits_slong_p(y.v_, MPFR_RNDN))
            return pow(a.with_precision(std::max(a.precision(), y.precision())),
                       mpfr_get_si(y.v_, MPFR_RNDN));
        if (a.sign() < 0)
            throw domain_error("negative base with non-integer exponent");
        if (a.is_zero() && y.sign() <= 0)
            throw domain_error("zero raised to a nonpositive power");
        return binary<mpfr_pow>(a, y);
    }
    friend Real ldexp(const Real& a, long e)
    {
        Real r(raw_tag{}, a.precision());
        mpfr_mul_2si(r.v_, a.v_, e, MPFR_RNDN);
        return r;
    }

    friend std::ostream& operator<<(std::ostream& os, const Real& a) { return os << a.to_string(); }

private:
    struct raw_tag
    {};
    Real(raw_tag, bits_t bits) { mpfr_init2(v_, bits); }

    template <int (*Fn)(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t)>
    static Real binary(const Real& a, const Real& b)
    {
        Real r(raw_tag{}, std::max(a.precision(), b.precision()));
        Fn(r.v_, a.v_, b.v_, MPFR_RNDN);
        return r;
    }

    template <int (*Fn)(mpfr_ptr, mpfr_srcptr, long, mpfr_rnd_t)>
    static Real with_si(const Real& a, long b)
    {
        Real r(raw_tag{}, a.precision());
        Fn(r.v_, a.v_, b, MPFR_RNDN);
        return r;
    }

    template <int (*Fn)(mpfr_ptr, mpfr_srcptr, mpfr_rnd_t)>
    static Real unary(const Real& a)
    {
        Real r(raw_tag{}, a.precision());
        Fn(r.v_, a.v_, MPFR_RNDN);
        return r;
    }

    mpfr_t v_;
};

inline const Real& min(const Real& a, const Real& b) { return b < a ? b : a; }
inline const Real& max(const Real& a, const Real& b) { return a < b ? b : a; }

/// Largest precision among `xs` (Real::default_bits when empty).
inline bits_t max_precision(std::span<const Real> xs)
{
    bits_t bits = Real::default_bits;
    for (const auto& x : xs)
        bits = std::max(bits, x.precision());
    return bits;
}

/// Working precision plus the number of low bits treated as roundoff noise.
struct PrecisionConfig
{
    bits_t working_bits = 1024;
    bits_t guard_bits = 32;

    static constexpr bits_t residuum_default_bits = 1024;
    static constexpr bits_t convergence_default_bits = 8192;

    void validate() const
    {
        if (working_bits < 64)
            throw std::invalid_argument("working_bits must be at least 64");
        if (guard_bits <= 0 || 2 * guard_bits >= working_bits)
            throw std::invalid_argument("guard_bits must be positive and below working_bits/2");
    }

    /// 2^(guard - working): relative size below which a value is noise.
    Real tolerance() const { return Real::pow2(guard_bits - working_bits, working_bits); }
};

/// |v| <= scale · 2^(guard_bits − working_bits).
inline bool effectively_zero(const Real& v, const Real& scale, const PrecisionConfig& cfg)
{
    if (!(scale > 0L))
        throw std::invalid_argument("effectively_zero needs a positive scale");
    return abs(v) <= abs(scale) * cfg.tolerance();
}

enum class ElementaryOp { add, sub, mul, div, pow_real, exp, log, sqrt, abs, compare };

inline ElementaryOp elementary_op_from_name(std::string_view name)
{
    constexpr std::pair<std::string_view, ElementaryOp> table[] = {
        {"add", ElementaryOp::add},   {"sub", ElementaryOp::sub},
        {"mul", ElementaryOp::mul},   {"div", ElementaryOp::div},
        {"pow_real", ElementaryOp::pow_real}, {"exp", ElementaryOp::exp},
        {"log", ElementaryOp::log},   {"sqrt", ElementaryOp::sqrt},
        {"abs", ElementaryOp::abs},   {"compare", ElementaryOp::compare},
    };
    for (auto [n, op] : table)
        if (n == name)
            return op;
    throw std::invalid_argument("unknown elementary operation '" + std::string(name) + "'");
}

/// Name-dispatched elementary operation. `compare` returns -1, 0 or 1.
inline Real elementary(ElementaryOp op, std::span<const Real> args)
{
    auto need = [&](std::size_t n) {
        if (args.size() != n)
            throw std::invalid_argument("elementary operation expects " + std::to_string(n) +
                                        " argument(s)");
    };
    switch (op) {
    case ElementaryOp::add: need(2); return args[0] + args[1];
    case ElementaryOp::sub: need(2); return args[0] - args[1];
    case ElementaryOp::mul: need(2); return args[0] * args[1];
    case ElementaryOp::div: need(2); return args[0] / args[1];
    case ElementaryOp::pow_real: need(2); return pow(args[0], args[1]);
    case ElementaryOp::exp: need(1); return exp(args[0]);
    case ElementaryOp::log: need(1); return log(args[0]);
    case ElementaryOp::sqrt: need(1); return sqrt(args[0]);
    case ElementaryOp::abs: need(1); return abs(args[0]);
    case ElementaryOp::compare: {
        need(2);
        auto c = args[0] <=> args[1];
        long s = c < 0 ? -1 : c > 0 ? 1 : 0;
        return Real(s, std::max(args[0].precision(), args[1].precision()));
    }
    }
    throw std::invalid_argument("unhandled elementary operation");
}

} // namespace meaniter

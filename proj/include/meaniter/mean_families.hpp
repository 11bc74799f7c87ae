#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "meaniter/functions.hpp"
#include "meaniter/param.hpp"
#include "meaniter/real.hpp"
#include "meaniter/roots.hpp"

namespace meaniter {

using MeanFn = std::function<Real(std::span<const Real>)>;

namespace family {

struct Arithmetic
{};

struct Geometric
{};

/// Hölder mean; alpha = 0 is the geometric mean.
struct Power
{
    Param alpha;
};

struct Gini
{
    Param alpha;
    Param beta;
};

struct QuasiArithmetic
{
    GeneratorFunction f;
};

/// (f/g)⁻¹(Σf(xᵢ) / Σg(xᵢ)) with g > 0 and f/g strictly increasing.
struct Bajraktarevic
{
    GeneratorFunction f;
    GeneratorFunction g;
};

/// Root u of Σ E(xᵢ, u) = 0.
struct Quasideviation
{
    DeviationFunction e;
};

/// Arbitrary user mean, optionally with a closed-form residuum. Nothing is
/// checked about it; this is how deliberately broken means are built.
struct Custom
{
    std::string name;
    MeanFn eval;
    UnaryFn residuum;
};

} // namespace family

using Family = std::variant<family::Arithmetic, family::Geometric, family::Power, family::Gini,
                            family::QuasiArithmetic, family::Bajraktarevic, family::Quasideviation,
                            family::Custom>;

/// Immutable description of one mean: its family with parameters or
/// generators, and the open interval it is defined on.
class MeanSpec
{
public:
    static MeanSpec arithmetic(Interval domain = Interval::real_line())
    {
        return MeanSpec(family::Arithmetic{}, domain);
    }

    static MeanSpec geometric(Interval domain = Interval::positive())
    {
        require_positive(domain, "geometric");
        return MeanSpec(family::Geometric{}, domain);
    }

    static MeanSpec power(Param alpha, Interval domain = Interval::positive())
    {
        require_positive(domain, "power");
        return MeanSpec(family::Power{std::move(alpha)}, domain);
    }

    static MeanSpec gini(Param alpha, Param beta, Interval domain = Interval::positive())
    {
        require_positive(domain, "gini");
        return MeanSpec(family::Gini{std::move(alpha), std::move(beta)}, domain);
    }

    static MeanSpec quasi_arithmetic(GeneratorFunction f)
    {
        if (!f.strictly_monotone())
            throw axiom_error("quasiarithmetic generator '" + f.name() + "' must be strictly monotone");
        Interval dom = f.domain();
        return MeanSpec(family::QuasiArithmetic{std::move(f)}, dom);
    }

    static MeanSpec bajraktarevic(GeneratorFunction f, GeneratorFunction g)
    {
        Interval dom = intersect(f.domain(), g.domain());
        auto grid = sample_grid(dom);
        std::optional<Real> prev;
        for (const auto& x : grid) {
            Real gx = g(x);
            if (!(gx > 0L))
                throw axiom_error("bajraktarevic weight g='" + g.name() + "' is not positive at " +
                                  x.to_string(8));
            Real ratio = f(x) / gx;
            if (prev && !(ratio > *prev))
                throw axiom_error("bajraktarevic ratio f/g is not strictly increasing near " +
                                  x.to_string(8));
            prev = std::move(ratio);
        }
        return MeanSpec(family::Bajraktarevic{std::move(f), std::move(g)}, dom);
    }

    static MeanSpec quasideviation(DeviationFunction e)
    {
        Interval dom = e.domain();
        return MeanSpec(family::Quasideviation{std::move(e)}, dom);
    }

    static MeanSpec custom(std::string name, MeanFn eval, Interval domain = Interval::real_line(),
                           UnaryFn residuum = {})
    {
        return MeanSpec(family::Custom{std::move(name), std::move(eval), std::move(residuum)},
                        domain);
    }

    const Family& family() const { return family_; }
    const Interval& domain() const { return domain_; }

    /// Same mean on a subinterval of its current domain.
    MeanSpec restricted_to(const Interval& sub) const
    {
        sub.validate();
        if (!sub.subset_of(domain_))
            throw domain_error("interval " + sub.to_string() + " is not inside the domain " +
                               domain_.to_string() + " of " + label());
        return MeanSpec(family_, sub);
    }

    template <class T>
    const T* as() const
    {
        return std::get_if<T>(&family_);
    }

    /// Short human readable name, e.g. "gini(2,1)".
    std::string label() const
    {
        struct
        {
            std::string operator()(const family::Arithmetic&) const { return "arithmetic"; }
            std::string operator()(const family::Geometric&) const { return "geometric"; }
            std::string operator()(const family::Power& m) const
            {
                return "power(" + m.alpha.text() + ")";
            }
            std::string operator()(const family::Gini& m) const
            {
                return "gini(" + m.alpha.text() + "," + m.beta.text() + ")";
            }
            std::string operator()(const family::QuasiArithmetic& m) const
            {
                return "quasiarithmetic(" + m.f.name() + ")";
            }
            std::string operator()(const family::Bajraktarevic& m) const
            {
                return "bajraktarevic(" + m.f.name() + "," + m.g.name() + ")";
            }
            std::string operator()(const family::Quasideviation& m) const
            {
                return "quasideviation(" + m.e.name() + ")";
            }
            std::string operator()(const family::Custom& m) const { return m.name; }
        } visitor;
        return std::visit(visitor, family_);
    }

    /// True for the families with strict mean property and a closed-form
    /// evaluation path (everything except Custom).
    bool is_builtin() const { return !std::holds_alternative<family::Custom>(family_); }

private:
    MeanSpec(Family f, Interval domain) : family_(std::move(f)), domain_(domain)
    {
        domain_.validate();
    }

    static void require_positive(const Interval& dom, const char* what)
    {
        dom.validate();
        if (!dom.subset_of(Interval::positive()))
            throw domain_error(std::string(what) + " mean needs a domain inside (0, inf)");
    }

    Family family_;
    Interval domain_;
};

/// f⁻¹(y) for a monotone generator, searched on `bracket`. Newton with
/// bisection fallback; the result satisfies |f(result) − y| at roundoff
/// level relative to |y|.
inline Real qa_invert(const GeneratorFunction& gen, const Real& y, const Real& lo, const Real& hi)
{
    try {
        return roots::newton_bisect([&](const Real& t) { return gen(t); },
                                    [&](const Real& t) { return gen.d1(t); }, y, lo, hi);
    } catch (const bracket_error& e) {
        throw bracket_error("cannot invert generator '" + gen.name() + "': " + e.what());
    }
}

namespace detail {

inline void require_nonempty(std::span<const Real> x)
{
    if (x.empty())
        throw std::invalid_argument("a mean needs at least one argument");
}

inline std::pair<Real, Real> min_max(std::span<const Real> x)
{
    auto [lo, hi] = std::minmax_element(x.begin(), x.end(),
                                        [](const Real& a, const Real& b) { return a < b; });
    return {*lo, *hi};
}

inline bool all_equal(std::span<const Real> x)
{
    return std::all_of(x.begin(), x.end(), [&](const Real& v) { return v == x.front(); });
}

inline Real sum(std::span<const Real> x, bits_t bits)
{
    Real s(0L, bits);
    for (const auto& v : x)
        s += v;
    return s;
}

inline Real power_sum(std::span<const Real> x, const Param& exponent, bits_t bits)
{
    Real s(0L, bits);
    if (auto n = exponent.as_integer()) {
        for (const auto& v : x)
            s += pow(v, *n);
    } else {
        Real e = exponent.value(bits);
        for (const auto& v : x)
            s += pow(v, e);
    }
    return s;
}

/// exp(Σ xᵢ^a log xᵢ / Σ xᵢ^a), the alpha = beta Gini branch, in log space.
inline Real gini_equal(std::span<const Real> x, const Param& alpha, bits_t bits)
{
    Real num(0L, bits), den(0L, bits);
    bool unit = alpha.as_integer() && *alpha.as_integer() == 0;
    Real a = alpha.value(bits);
    for (const auto& v : x) {
        Real w = unit ? Real(1L, bits) : pow(v, a);
        num += w * log(v);
        den += w;
    }
    return exp(num / den);
}

inline Real gini_mean(std::span<const Real> x, const Param& alpha, const Param& beta, bits_t bits)
{
    if (alpha == beta)
        return gini_equal(x, alpha, bits);
    Real ratio = power_sum(x, alpha, bits) / power_sum(x, beta, bits);
    Real diff = alpha.value(bits) - beta.value(bits);
    if (diff == 1L)
        return ratio;
    if (diff == -1L)
        return 1L / ratio;
    if (diff == 2L)
        return sqrt(ratio);
    return pow(ratio, 1L / diff);
}

} // namespace detail

/// Deviation mean: the unique u in [min x, max x] with Σ E(xᵢ, u) = 0.
/// The sum is positive at min x and negative at max x by the sign
/// condition, so bisection cannot stall.
inline Real qd_solve(const DeviationFunction& e, std::span<const Real> x)
{
    detail::require_nonempty(x);
    if (detail::all_equal(x))
        return x.front();
    bits_t bits = max_precision(x);
    auto [lo, hi] = detail::min_max(x);
    auto total = [&](const Real& u) {
        Real s(0L, bits);
        for (const auto& v : x)
            s += e(v, u);
        return s;
    };
    try {
        return roots::bisect_illinois(total, lo.with_precision(bits), hi.with_precision(bits));
    } catch (const bracket_error& err) {
        throw bracket_error("deviation '" + e.name() + "' violates the sign condition (D1): " +
                            err.what());
    }
}

/// Evaluates `spec` at x. Every entry must lie strictly inside the domain.
/// Built-in families are reflexive exactly and their result is clamped into
/// [min x, max x], where the exact value provably lies.
inline Real eval_mean(const MeanSpec& spec, std::span<const Real> x)
{
    detail::require_nonempty(x);
    for (const auto& v : x)
        if (!spec.domain().contains(v))
            throw domain_error("argument " + v.to_string(12) + " outside the domain " +
                               spec.domain().to_string() + " of " + spec.label());
    const bits_t bits = max_precision(x);
    if (const auto* c = spec.as<family::Custom>())
        return c->eval(x);
    if (detail::all_equal(x))
        return x.front().with_precision(bits);

    const long n = static_cast<long>(x.size());
    auto [lo, hi] = detail::min_max(x);
    lo = lo.with_precision(bits);
    hi = hi.with_precision(bits);

    struct
    {
        std::span<const Real> x;
        bits_t bits;
        long n;
        const Real& lo;
        const Real& hi;

        Real operator()(const family::Arithmetic&) const { return detail::sum(x, bits) / n; }
        Real operator()(const family::Geometric&) const
        {
            return detail::gini_equal(x, Param(0L), bits);
        }
        Real operator()(const family::Power& m) const
        {
            return detail::gini_mean(x, m.alpha, Param(0L), bits);
        }
        Real operator()(const family::Gini& m) const
        {
            return detail::gini_mean(x, m.alpha, m.beta, bits);
        }
        Real operator()(const family::QuasiArithmetic& m) const
        {
            Real y(0L, bits);
            for (const auto& v : x)
                y += m.f(v);
            return qa_invert(m.f, y / n, lo, hi);
        }
        Real operator()(const family::Bajraktarevic& m) const
        {
            Real fs(0L, bits), gs(0L, bits);
            for (const auto& v : x) {
                fs += m.f(v);
                gs += m.g(v);
            }
            auto ratio = [&](const Real& t) { return m.f(t) / m.g(t); };
            auto ratio_d1 = [&](const Real& t) {
                Real gt = m.g(t);
                return (m.f.d1(t) * gt - m.f(t) * m.g.d1(t)) / (gt * gt);
            };
            try {
                return roots::newton_bisect(ratio, ratio_d1, fs / gs, lo, hi);
            } catch (const bracket_error& e) {
                throw bracket_error("cannot invert f/g for " + m.f.name() + "," + m.g.name() +
                                    ": " + e.what());
            }
        }
        Real operator()(const family::Quasideviation& m) const { return qd_solve(m.e, x); }
        Real operator()(const family::Custom& m) const { return m.eval(x); }
    } visitor{x, bits, n, lo, hi};

    Real m = std::visit(visitor, spec.family());
    if (m < lo)
        return lo;
    if (m > hi)
        return hi;
    return m;
}

inline Real eval_mean(const MeanSpec& spec, std::initializer_list<Real> x)
{
    std::vector<Real> v(x);
    return eval_mean(spec, std::span<const Real>(v));
}

/// Outcome of fuzzing the mean axioms on a set of sample vectors.
struct AxiomReport
{
    std::size_t vectors_checked = 0;
    std::size_t mean_property_violations = 0;
    std::size_t symmetry_violations = 0;
    std::size_t repetition_violations = 0;
    std::vector<std::string> messages;

    bool ok() const
    {
        return mean_property_violations == 0 && symmetry_violations == 0 &&
               repetition_violations == 0;
    }
};

/// Checks the mean property, symmetry under permutations (all of them up to
/// length 5, otherwise rotations and the reversal) and repetition
/// invariance for q ∈ {2, 3} on every sample. Comparisons allow
/// 2^(guard − working) relative slack.
inline AxiomReport probe_mean_axioms(const MeanSpec& spec, std::span<const std::vector<Real>> samples)
{
    AxiomReport report;
    for (const auto& sample : samples) {
        if (sample.empty())
            continue;
        ++report.vectors_checked;
        bits_t bits = max_precision(sample);
        PrecisionConfig cfg{bits, std::min<bits_t>(32, bits / 4)};
        auto [lo, hi] = detail::min_max(sample);
        Real scale = max(max(abs(lo), abs(hi)), Real(1L, bits));
        Real slack = scale * cfg.tolerance();
        auto close = [&](const Real& a, const Real& b) { return abs(a - b) <= slack; };
        auto where = [&] {
            std::string s = spec.label() + " at (";
            for (std::size_t i = 0; i < sample.size(); ++i)
                s += (i ? ", " : "") + sample[i].to_string(10);
            return s + ")";
        };

        Real m = eval_mean(spec, sample);
        if (m < lo - slack || m > hi + slack) {
            ++report.mean_property_violations;
            report.messages.push_back("mean property violated: " + where() + " -> " +
                                      m.to_string(12));
        }

        std::vector<Real> perm = sample;
        std::vector<std::size_t> idx(sample.size());
        std::iota(idx.begin(), idx.end(), 0);
        auto check_perm = [&](const std::vector<std::size_t>& order) {
            for (std::size_t i = 0; i < order.size(); ++i)
                perm[i] = sample[order[i]];
            if (!close(eval_mean(spec, perm), m)) {
                ++report.symmetry_violations;
                report.messages.push_back("symmetry violated: " + where());
                return false;
            }
            return true;
        };
        if (sample.size() <= 5) {
            while (std::next_permutation(idx.begin(), idx.end()))
                if (!check_perm(idx))
                    break;
        } else {
            for (std::size_t r = 1; r < idx.size(); ++r) {
                std::vector<std::size_t> rot(idx);
                std::rotate(rot.begin(), rot.begin() + static_cast<long>(r), rot.end());
                if (!check_perm(rot))
                    break;
            }
            std::vector<std::size_t> rev(idx.rbegin(), idx.rend());
            check_perm(rev);
        }

        for (int q : {2, 3}) {
            std::vector<Real> repeated;
            for (const auto& v : sample)
                for (int k = 0; k < q; ++k)
                    repeated.push_back(v);
            if (!close(eval_mean(spec, repeated), m)) {
                ++report.repetition_violations;
                report.messages.push_back("repetition invariance (q=" + std::to_string(q) +
                                          ") violated: " + where());
            }
        }
    }
    return report;
}

} // namespace meaniter

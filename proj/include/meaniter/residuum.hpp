#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meaniter/mean_families.hpp"
#include "meaniter/real.hpp"

// Residuum ξ_M(x): the coefficient in
//
//   M(x·1 + t·s) = x + t·E[s] + (t²/2)·ξ_M(x)·Var(s) + o(t²),
//
// computed three ways. The analytic route uses the closed forms of each
// family. The limit route extrapolates
//   (2p²/((p−1)t²))·(M(x+t, x, …, x) − x − t/p)   as t → 0.
// The Hessian route takes central differences on the diagonal:
//   ξ = −p²·∂₁∂₂M(x·1) = p²/(p−1)·∂₁²M(x·1).

namespace meaniter {

enum class ResiduumMethod { analytic, limit_extrapolation, hessian_fd };

inline const char* to_string(ResiduumMethod m)
{
    switch (m) {
    case ResiduumMethod::analytic: return "analytic";
    case ResiduumMethod::limit_extrapolation: return "limit_extrapolation";
    case ResiduumMethod::hessian_fd: return "hessian_fd";
    }
    return "?";
}

struct ResiduumEstimate
{
    Real value;
    Real uncertainty;
    ResiduumMethod method = ResiduumMethod::analytic;
    int p_used = 2;
    std::vector<std::string> warnings;
};

namespace detail {

inline void require_arity(int p)
{
    if (p < 2)
        throw std::invalid_argument("the residuum needs p >= 2 (it divides by p - 1), got p = " +
                                    std::to_string(p));
}

inline void require_interior(const MeanSpec& spec, const Real& x)
{
    if (!spec.domain().contains(x))
        throw domain_error("point " + x.to_string(12) + " is outside the domain " +
                           spec.domain().to_string() + " of " + spec.label());
}

/// Throws unless `den` is clearly nonzero. With a positive `cancel_scale`
/// (the size of the terms that cancelled into `den`) values at roundoff
/// level count as zero too.
inline void require_nonzero(const Real& den, const Real& cancel_scale, const std::string& what)
{
    bool zero = den.is_zero();
    if (!zero && cancel_scale > 0L) {
        PrecisionConfig cfg{den.precision(), 32};
        zero = effectively_zero(den, cancel_scale, cfg);
    }
    if (zero)
        throw domain_error(what);
}

inline Real unit_scale(const Real& x) { return max(abs(x), Real(1L, x.precision())); }

/// Vector x·1 with entries i and j (j may be -1) shifted.
inline std::vector<Real> diagonal_point(const Real& x, int p, int i, const Real& di, int j = -1,
                                        const Real* dj = nullptr)
{
    std::vector<Real> v(static_cast<std::size_t>(p), x);
    v[static_cast<std::size_t>(i)] = x + di;
    if (j >= 0)
        v[static_cast<std::size_t>(j)] = x + *dj;
    return v;
}

} // namespace detail

/// Finite-difference check of the identities (∂₁E + ∂₂E)(x,x) = 0 and
/// (∂₁²E + 2∂₁∂₂E + ∂₂²E)(x,x) = 0 that every smooth deviation vanishing on
/// the diagonal satisfies. Each sum is compared to the sum of magnitudes of
/// its terms.
struct DiagonalIdentityReport
{
    Real first;
    Real first_scale;
    Real second;
    Real second_scale;
    Real tolerance;
    bool first_ok = false;
    bool second_ok = false;

    bool ok() const { return first_ok && second_ok; }
};

inline DiagonalIdentityReport check_diagonal_identities(const BinaryFn& e, const Real& x)
{
    const bits_t bits = x.precision();
    Real h = ldexp(detail::unit_scale(x), -static_cast<long>(bits / 4));
    Real xp = x + h, xm = x - h;
    Real e0 = e(x, x);
    Real e1 = (e(xp, x) - e(xm, x)) / (2L * h);
    Real e2 = (e(x, xp) - e(x, xm)) / (2L * h);
    Real h2 = h * h;
    Real e11 = (e(xp, x) - 2L * e0 + e(xm, x)) / h2;
    Real e22 = (e(x, xp) - 2L * e0 + e(x, xm)) / h2;
    Real e12 = (e(xp, xp) - e(xp, xm) - e(xm, xp) + e(xm, xm)) / (4L * h2);

    DiagonalIdentityReport r;
    r.first = e1 + e2;
    r.first_scale = abs(e1) + abs(e2);
    r.second = e11 + 2L * e12 + e22;
    r.second_scale = abs(e11) + 2L * abs(e12) + abs(e22);
    r.tolerance = Real::pow2(-static_cast<long>(bits / 4), bits);
    r.first_ok = abs(r.first) <= r.tolerance * max(r.first_scale, Real(1L, bits) * r.tolerance);
    r.second_ok = abs(r.second) <= r.tolerance * max(r.second_scale, Real(1L, bits) * r.tolerance);
    return r;
}

/// Φ_{f,g} = (g f″ − f g″)/(g f′ − f g′) and Ψ_{f,g} = (g′f″ − f′g″)/(g f′ − f g′).
struct BajraktarevicInvariants
{
    Real phi;
    Real psi;
};

inline BajraktarevicInvariants bajraktarevic_invariants(const GeneratorFunction& f,
                                                        const GeneratorFunction& g, const Real& x)
{
    Real fv = f(x), f1 = f.d1(x), f2 = f.d2(x);
    Real gv = g(x), g1 = g.d1(x), g2 = g.d2(x);
    Real a = gv * f1, b = fv * g1;
    Real den = a - b;
    detail::require_nonzero(den, abs(a) + abs(b),
                            "g f' - f g' vanishes at " + x.to_string(12) + " for (" + f.name() +
                                ", " + g.name() + ")");
    return {(gv * f2 - fv * g2) / den, (g1 * f2 - f1 * g2) / den};
}

/// Closed-form residuum. Uncertainty covers roundoff only. `p` is recorded
/// in the estimate; the formulas do not depend on it.
inline ResiduumEstimate residuum_analytic(const MeanSpec& spec, const Real& x, int p = 2)
{
    detail::require_arity(p);
    detail::require_interior(spec, x);
    const bits_t bits = x.precision();
    std::vector<std::string> warnings;

    struct
    {
        const Real& x;
        bits_t bits;
        std::vector<std::string>& warnings;

        Real operator()(const family::Arithmetic&) const { return Real(0L, bits); }
        Real operator()(const family::Geometric&) const { return -1L / x; }
        Real operator()(const family::Power& m) const { return (m.alpha.value(bits) - 1L) / x; }
        Real operator()(const family::Gini& m) const
        {
            return (m.alpha.value(bits) + m.beta.value(bits) - 1L) / x;
        }
        Real operator()(const family::QuasiArithmetic& m) const
        {
            Real d1 = m.f.d1(x);
            detail::require_nonzero(d1, Real(0L, bits),
                                    "f' vanishes at " + x.to_string(12) + " for '" + m.f.name() + "'");
            return m.f.d2(x) / d1;
        }
        Real operator()(const family::Bajraktarevic& m) const
        {
            return bajraktarevic_invariants(m.f, m.g, x).phi;
        }
        Real operator()(const family::Quasideviation& m) const
        {
            Real d1 = m.e.d1(x, x);
            detail::require_nonzero(d1, Real(0L, bits),
                                    "deviation '" + m.e.name() +
                                        "' is not normalizable at " + x.to_string(12) +
                                        " (d1E(x,x) = 0)");
            auto diag = check_diagonal_identities(
                [&](const Real& a, const Real& b) { return m.e(a, b); }, x);
            if (!diag.ok())
                warnings.push_back("deviation '" + m.e.name() +
                                   "' fails the diagonal derivative identities at " +
                                   x.to_string(12) + "; the analytic residuum is unreliable");
            return m.e.d11(x, x) / d1;
        }
        Real operator()(const family::Custom& m) const
        {
            if (!m.residuum)
                throw std::invalid_argument("custom mean '" + m.name +
                                            "' has no analytic residuum");
            return m.residuum(x);
        }
    } visitor{x, bits, warnings};

    Real value = std::visit(visitor, spec.family());
    Real unc = ldexp(abs(value), 4 - bits);
    return {std::move(value), std::move(unc), ResiduumMethod::analytic, p, std::move(warnings)};
}

namespace detail {

constexpr int limit_levels = 13;

/// Largest admissible perturbation around x: `wanted`, cut to a quarter of
/// the distance to the domain boundary.
inline Real admissible_step(const MeanSpec& spec, const Real& x, Real wanted)
{
    Real room = spec.domain().room(x);
    if (room.is_finite())
        wanted = min(wanted, room / 4L);
    return wanted;
}

} // namespace detail

/// Residuum as lim (2p²/((p−1)t²))·(M(x+t, x, …, x) − x − t/p).
///
/// Steps t_k = t₀·2^−k, t₀ = 10⁻²·max(1,|x|), k = 0…12. The estimator at
/// ±t is averaged, which removes every odd power of t, and the remaining
/// series in t² is Richardson-extrapolated. The uncertainty is the last
/// diagonal correction of the table plus a roundoff floor.
inline ResiduumEstimate residuum_limit(const MeanSpec& spec, int p, const Real& x)
{
    detail::require_arity(p);
    detail::require_interior(spec, x);
    const bits_t bits = x.precision();
    const Real scale = detail::unit_scale(x);
    Real t0 = detail::admissible_step(spec, x, scale / 100L);

    const Real coeff = Real(2L * p * p, bits) / (p - 1L);
    auto raw = [&](const Real& t) {
        auto v = detail::diagonal_point(x, p, 0, t);
        Real m = eval_mean(spec, v);
        return coeff * ((m - x) - t / p) / (t * t);
    };

    std::vector<std::vector<Real>> table;
    table.reserve(detail::limit_levels);
    Real t = t0;
    for (int k = 0; k < detail::limit_levels; ++k) {
        std::vector<Real> row;
        row.reserve(static_cast<std::size_t>(k) + 1);
        row.push_back((raw(t) + raw(-t)) / 2L);
        Real factor(1L, bits);
        for (int j = 1; j <= k; ++j) {
            factor *= Real(4L, bits);
            const Real& prev_same = row.back();
            const Real& prev_row = table.back()[static_cast<std::size_t>(j) - 1];
            row.push_back(prev_same + (prev_same - prev_row) / (factor - 1L));
        }
        table.push_back(std::move(row));
        t = ldexp(t, -1);
    }

    const auto& last = table.back();
    const auto& before = table[table.size() - 2];
    Real value = last.back();
    Real correction = abs(last.back() - before.back());
    Real t_min = ldexp(t0, -(detail::limit_levels - 1));
    Real floor = coeff * ldexp(scale, 8 - bits) / (t_min * t_min);
    Real unc = correction + floor;

    Real rel_scale = max(abs(value), 1L / scale);
    if (!value.is_finite() || unc > ldexp(rel_scale, -20))
        throw convergence_error("limit extrapolation for " + spec.label() + " at x=" +
                                x.to_string(12) + " did not converge (last correction " +
                                correction.to_string(6) +
                                "); the mean does not look C^2 near the diagonal");
    return {std::move(value), std::move(unc), ResiduumMethod::limit_extrapolation, p, {}};
}

/// Both Hessian forms, first −p²·∂₁∂₂M(x·1), then p²/(p−1)·∂₁²M(x·1).
struct HessianForms
{
    ResiduumEstimate mixed;
    ResiduumEstimate pure;
    /// Largest uncertainty that still counts as a converged difference
    /// quotient: 2^-20 of max(|value|, 1/max(1,|x|)).
    Real settle_limit;

    /// Both quotients settled between h and 2h, and the two forms agree
    /// within ten times their combined uncertainty. A kink on the
    /// diagonal makes the quotients grow like 1/h and fails the first part.
    bool agree() const
    {
        return mixed.uncertainty <= settle_limit && pure.uncertainty <= settle_limit &&
               abs(mixed.value - pure.value) <= 10L * (mixed.uncertainty + pure.uncertainty);
    }
};

/// Central differences with h = 2^(−bits/4)·max(1,|x|); each value is
/// compared with the one at 2h, and their difference plus a roundoff bound
/// is the uncertainty. No agreement check.
inline HessianForms residuum_hessian_forms(const MeanSpec& spec, int p, const Real& x)
{
    detail::require_arity(p);
    detail::require_interior(spec, x);
    const bits_t bits = x.precision();
    const Real scale = detail::unit_scale(x);
    Real h = detail::admissible_step(spec, x, ldexp(scale, -static_cast<long>(bits / 4)));
    const long p2 = static_cast<long>(p) * p;
    std::vector<Real> center(static_cast<std::size_t>(p), x);
    const Real m0 = eval_mean(spec, center);

    auto pure_at = [&](const Real& step) {
        Real plus = eval_mean(spec, detail::diagonal_point(x, p, 0, step));
        Real minus = eval_mean(spec, detail::diagonal_point(x, p, 0, -step));
        Real d2 = (plus - 2L * m0 + minus) / (step * step);
        return p2 * d2 / (p - 1L);
    };
    auto mixed_at = [&](const Real& step) {
        Real ms = -step;
        Real pp = eval_mean(spec, detail::diagonal_point(x, p, 0, step, 1, &step));
        Real pm = eval_mean(spec, detail::diagonal_point(x, p, 0, step, 1, &ms));
        Real mp = eval_mean(spec, detail::diagonal_point(x, p, 0, ms, 1, &step));
        Real mm = eval_mean(spec, detail::diagonal_point(x, p, 0, ms, 1, &ms));
        Real d12 = (pp - pm - mp + mm) / (4L * step * step);
        return -p2 * d12;
    };

    Real h2 = ldexp(h, 1);
    Real roundoff = ldexp(scale, 5 - bits) * p2 / (h * h);
    Real pure_h = pure_at(h), pure_2h = pure_at(h2);
    Real mixed_h = mixed_at(h), mixed_2h = mixed_at(h2);

    Real settle = ldexp(max(max(abs(mixed_h), abs(pure_h)), 1L / scale), -20);
    HessianForms out{
        {mixed_h, abs(mixed_h - mixed_2h) + roundoff, ResiduumMethod::hessian_fd, p, {}},
        {pure_h, abs(pure_h - pure_2h) + 4L * roundoff / (p - 1L), ResiduumMethod::hessian_fd, p,
         {}},
        std::move(settle),
    };
    return out;
}

/// As residuum_hessian_forms, but throws unless agree() holds.
inline HessianForms residuum_hessian(const MeanSpec& spec, int p, const Real& x)
{
    HessianForms f = residuum_hessian_forms(spec, p, x);
    if (!f.agree())
        throw convergence_error("mean " + spec.label() + " is not symmetric-C^2 at x=" +
                                x.to_string(12) + ": Hessian forms " + f.mixed.value.to_string(12) +
                                " and " + f.pure.value.to_string(12) + " disagree");
    return f;
}

/// All three routes side by side with agreement flags. A numerical route
/// that fails records a warning instead of throwing.
struct ResiduumComparison
{
    ResiduumEstimate analytic;
    std::optional<ResiduumEstimate> limit;
    std::optional<HessianForms> hessian;
    bool limit_agrees = false;
    bool hessian_agrees = false;
    std::vector<std::string> warnings;
};

inline bool estimates_agree(const ResiduumEstimate& a, const ResiduumEstimate& b)
{
    return abs(a.value - b.value) <= 10L * (a.uncertainty + b.uncertainty);
}

inline ResiduumComparison compare_residuum_estimators(const MeanSpec& spec, int p, const Real& x)
{
    ResiduumComparison c{residuum_analytic(spec, x, p), std::nullopt, std::nullopt, false, false, {}};
    c.warnings = c.analytic.warnings;
    try {
        c.limit = residuum_limit(spec, p, x);
        c.limit_agrees = estimates_agree(c.analytic, *c.limit);
    } catch (const convergence_error& e) {
        c.warnings.push_back(e.what());
    }
    c.hessian = residuum_hessian_forms(spec, p, x);
    c.hessian_agrees = c.hessian->agree() && estimates_agree(c.analytic, c.hessian->mixed) &&
                       estimates_agree(c.analytic, c.hessian->pure);
    if (!c.hessian->agree())
        c.warnings.push_back("mean " + spec.label() + " is not symmetric-C^2 at x=" +
                             x.to_string(12) + ": the Hessian forms disagree");
    if (!c.limit_agrees || !c.hessian_agrees)
        c.warnings.push_back("numerical residua disagree with the analytic value; reporting the "
                             "analytic value");
    return c;
}

/// Fit of log(defect) = log λ + α·log r over the probe radii.
struct ResidualityReport
{
    Real fitted_exponent;
    Real fitted_scale;
    std::vector<Real> radii_used;
    std::vector<Real> defects;
    std::size_t directions_used = 0;
    bool exact = false;
    Real residuum_used;
};

/// Sup-norm unit directions: ±eᵢ for every i and (±eᵢ ± eⱼ) for every pair.
inline std::vector<std::vector<long>> probe_directions(int p)
{
    std::vector<std::vector<long>> dirs;
    for (int i = 0; i < p; ++i)
        for (long s : {1L, -1L}) {
            std::vector<long> d(static_cast<std::size_t>(p), 0);
            d[static_cast<std::size_t>(i)] = s;
            dirs.push_back(std::move(d));
        }
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            for (long si : {1L, -1L})
                for (long sj : {1L, -1L}) {
                    std::vector<long> d(static_cast<std::size_t>(p), 0);
                    d[static_cast<std::size_t>(i)] = si;
                    d[static_cast<std::size_t>(j)] = sj;
                    dirs.push_back(std::move(d));
                }
    return dirs;
}

/// Measures max over directions η of
///   |M(x·1 + rη) − x − E[rη] − ½ξ(x)Var(rη)|
/// for each radius r and fits the power law. The residuum comes from the
/// analytic formula when there is one, else from the limit estimator.
/// A defect at roundoff level at any radius marks the expansion "exact"
/// and the exponent is +inf.
inline ResidualityReport residuality_probe(const MeanSpec& spec, int p, const Real& x,
                                           std::span<const Real> radii)
{
    detail::require_arity(p);
    detail::require_interior(spec, x);
    if (radii.size() < 6)
        throw std::invalid_argument("the residuality fit needs at least 6 radii");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0L))
            throw std::invalid_argument("radii must be positive");
        if (i > 0 && !(radii[i] < radii[i - 1]))
            throw std::invalid_argument("radii must be strictly decreasing");
    }
    if (radii.front() / radii.back() < 1000L)
        throw std::invalid_argument("radii must span at least three decades");
    Real room = spec.domain().room(x);
    if (!(radii.front() < room))
        throw domain_error("largest radius leaves the domain of " + spec.label());

    const bits_t bits = x.precision();
    Real xi;
    try {
        xi = residuum_analytic(spec, x, p).value;
    } catch (const std::invalid_argument&) {
        xi = residuum_limit(spec, p, x).value;
    }

    const auto dirs = probe_directions(p);
    PrecisionConfig cfg{bits, 32};
    const Real scale = detail::unit_scale(x);

    ResidualityReport rep;
    rep.directions_used = dirs.size();
    rep.residuum_used = xi;
    for (const auto& r : radii) {
        Real worst(0L, bits);
        for (const auto& eta : dirs) {
            std::vector<Real> s, v;
            for (long e : eta)
                s.push_back(r * e);
            Real mean_s(0L, bits);
            for (const auto& si : s)
                mean_s += si;
            mean_s = mean_s / static_cast<long>(p);
            Real var_s(0L, bits);
            for (const auto& si : s) {
                Real d = si - mean_s;
                var_s += d * d;
            }
            var_s = var_s / static_cast<long>(p);
            for (const auto& si : s)
                v.push_back(x + si);
            Real defect = abs(eval_mean(spec, v) - x - mean_s - xi * var_s / 2L);
            worst = max(worst, defect);
        }
        if (effectively_zero(worst, scale, cfg))
            rep.exact = true;
        rep.radii_used.push_back(r);
        rep.defects.push_back(worst);
    }

    if (rep.exact) {
        rep.fitted_exponent = Real::infinity(bits, 1);
        rep.fitted_scale = Real(0L, bits);
        return rep;
    }

    const long n = static_cast<long>(radii.size());
    Real su(0L, bits), sv(0L, bits);
    std::vector<Real> us, vs;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        us.push_back(log(rep.radii_used[i]));
        vs.push_back(log(rep.defects[i]));
        su += us.back();
        sv += vs.back();
    }
    Real mu = su / n, mv = sv / n;
    Real sxy(0L, bits), sxx(0L, bits);
    for (std::size_t i = 0; i < us.size(); ++i) {
        Real du = us[i] - mu;
        sxy += du * (vs[i] - mv);
        sxx += du * du;
    }
    rep.fitted_exponent = sxy / sxx;
    rep.fitted_scale = exp(mv - rep.fitted_exponent * mu);
    return rep;
}

/// Radii 10^-1 … 10^-4 in half-decade steps (7 radii), scaled by max(1,|x|).
inline std::vector<Real> default_probe_radii(const Real& x)
{
    std::vector<Real> r;
    const bits_t bits = x.precision();
    Real scale = detail::unit_scale(x);
    Real step = pow(Real(10L, bits), Real::parse("-0.5", bits));
    Real cur = scale / 10L;
    for (int k = 0; k < 7; ++k) {
        r.push_back(cur);
        cur *= step;
    }
    return r;
}

struct ArityPair
{
    int p;
    int q;
    Real difference;
    Real tolerance;
    bool consistent;
};

struct PIndependenceReport
{
    std::vector<ResiduumEstimate> estimates;
    std::vector<ArityPair> pairs;
    Real max_difference;

    bool consistent() const
    {
        for (const auto& pr : pairs)
            if (!pr.consistent)
                return false;
        return true;
    }
};

/// Limit-route residuum at each arity and every pairwise difference,
/// judged against ten times the combined uncertainty.
inline PIndependenceReport p_independence_check(const MeanSpec& spec, const Real& x,
                                                std::span<const int> arities)
{
    if (arities.size() < 2)
        throw std::invalid_argument("p-independence needs at least two arities");
    PIndependenceReport rep;
    rep.max_difference = Real(0L, x.precision());
    for (int p : arities)
        rep.estimates.push_back(residuum_limit(spec, p, x));
    for (std::size_t i = 0; i < arities.size(); ++i)
        for (std::size_t j = i + 1; j < arities.size(); ++j) {
            const auto& a = rep.estimates[i];
            const auto& b = rep.estimates[j];
            Real diff = abs(a.value - b.value);
            Real tol = 10L * (a.uncertainty + b.uncertainty);
            rep.max_difference = max(rep.max_difference, diff);
            rep.pairs.push_back({arities[i], arities[j], diff, tol, diff <= tol});
        }
    return rep;
}

} // namespace meaniter

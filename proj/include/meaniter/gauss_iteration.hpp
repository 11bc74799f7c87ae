#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meaniter/mean_families.hpp"
#include "meaniter/real.hpp"
#include "meaniter/residuum.hpp"

namespace meaniter {

/// Square mapping (M₁, …, M_p): I^p → I^p on the common domain of its means.
class MeanTypeMapping
{
public:
    explicit MeanTypeMapping(std::vector<MeanSpec> means) : means_(std::move(means))
    {
        if (means_.size() < 2)
            throw std::invalid_argument("a mean-type mapping needs at least two means");
        domain_ = means_.front().domain();
        for (const auto& m : means_)
            domain_ = intersect(domain_, m.domain());
    }

    std::size_t size() const { return means_.size(); }
    const std::vector<MeanSpec>& means() const { return means_; }
    const Interval& domain() const { return domain_; }

    std::vector<Real> apply(std::span<const Real> y) const
    {
        std::vector<Real> out;
        out.reserve(means_.size());
        for (const auto& m : means_)
            out.push_back(eval_mean(m, y));
        return out;
    }

private:
    std::vector<MeanSpec> means_;
    Interval domain_;
};

enum class TerminationReason { variance_underflow, max_iterations, became_constant };

inline const char* to_string(TerminationReason r)
{
    switch (r) {
    case TerminationReason::variance_underflow: return "variance_underflow";
    case TerminationReason::max_iterations: return "max_iterations";
    case TerminationReason::became_constant: return "became_constant";
    }
    return "?";
}

/// Population variance E[s²] − (E[s])², evaluated in the centred form so
/// tiny variances of vectors far from zero keep their digits.
inline Real population_variance(std::span<const Real> s)
{
    bits_t bits = max_precision(s);
    const long n = static_cast<long>(s.size());
    Real mean(0L, bits);
    for (const auto& v : s)
        mean += v;
    mean = mean / n;
    Real acc(0L, bits);
    for (const auto& v : s) {
        Real d = v - mean;
        acc += d * d;
    }
    return acc / n;
}

inline Real diameter(std::span<const Real> s)
{
    auto [lo, hi] = std::minmax_element(s.begin(), s.end(),
                                        [](const Real& a, const Real& b) { return a < b; });
    return *hi - *lo;
}

struct IterationTrace
{
    std::vector<std::vector<Real>> states;
    std::vector<Real> variances;
    std::vector<Real> diameters;
    /// ratios[n] = Var y⁽ⁿ⁺¹⁾ / (Var y⁽ⁿ⁾)², present only while Var y⁽ⁿ⁾ is
    /// above the usable floor 2^(2·guard − working)·scale².
    std::vector<std::optional<Real>> ratios;
    Real invariant_estimate;
    TerminationReason terminated_reason = TerminationReason::max_iterations;
    PrecisionConfig config;
    /// max |x0ᵢ|; all variance floors are relative to its square.
    Real scale;

    Real usable_floor() const
    {
        return ldexp(scale * scale, 2 * config.guard_bits - config.working_bits);
    }

    std::vector<std::size_t> usable_ratio_indices() const
    {
        std::vector<std::size_t> idx;
        for (std::size_t n = 0; n < ratios.size(); ++n)
            if (ratios[n])
                idx.push_back(n);
        return idx;
    }
};

constexpr int default_max_iterations = 64;

/// Runs y⁽⁰⁾ = x0, y⁽ⁿ⁺¹⁾ = M(y⁽ⁿ⁾) at cfg.working_bits. Stops when the
/// state is exactly constant, when its variance drops to
/// 2^(guard − working)·scale², or after max_iter applications. Each step is
/// checked against the mean property; a violation means a broken user mean
/// and raises domain_error.
inline IterationTrace iterate(const MeanTypeMapping& mapping, std::span<const Real> x0,
                              const PrecisionConfig& cfg, int max_iter = default_max_iterations)
{
    cfg.validate();
    if (max_iter < 1)
        throw std::invalid_argument("max_iter must be at least 1");
    if (x0.size() != mapping.size())
        throw std::invalid_argument("initial vector has " + std::to_string(x0.size()) +
                                    " entries but the mapping has " +
                                    std::to_string(mapping.size()) + " means");
    const bits_t bits = cfg.working_bits;

    IterationTrace tr;
    tr.config = cfg;
    std::vector<Real> y;
    for (const auto& v : x0) {
        if (!mapping.domain().contains(v))
            throw domain_error("initial entry " + v.to_string(12) + " outside the domain " +
                               mapping.domain().to_string());
        y.push_back(v.with_precision(bits));
    }
    tr.scale = Real(0L, bits);
    for (const auto& v : y)
        tr.scale = max(tr.scale, abs(v));
    if (tr.scale.is_zero())
        tr.scale = Real(1L, bits);
    const Real underflow = ldexp(tr.scale * tr.scale, cfg.guard_bits - cfg.working_bits);
    const Real usable = tr.usable_floor();

    for (int n = 0;; ++n) {
        Real var = population_variance(y);
        Real diam = diameter(y);
        tr.variances.push_back(var);
        tr.diameters.push_back(diam);
        tr.states.push_back(y);
        if (n > 0) {
            const Real& prev = tr.variances[static_cast<std::size_t>(n) - 1];
            if (prev > usable)
                tr.ratios.push_back(var / (prev * prev));
            else
                tr.ratios.push_back(std::nullopt);
        }
        if (diam.is_zero()) {
            tr.terminated_reason = TerminationReason::became_constant;
            break;
        }
        if (var <= underflow) {
            tr.terminated_reason = TerminationReason::variance_underflow;
            break;
        }
        if (n == max_iter) {
            tr.terminated_reason = TerminationReason::max_iterations;
            break;
        }
        auto [lo, hi] = std::minmax_element(y.begin(), y.end(),
                                            [](const Real& a, const Real& b) { return a < b; });
        std::vector<Real> next = mapping.apply(y);
        for (std::size_t i = 0; i < next.size(); ++i) {
            if (!mapping.domain().contains(next[i]))
                throw domain_error("mean " + mapping.means()[i].label() + " left the domain at step " +
                                   std::to_string(n + 1));
            if (next[i] < *lo || next[i] > *hi)
                throw domain_error("mean " + mapping.means()[i].label() +
                                   " violated the mean property at step " + std::to_string(n + 1));
        }
        y = std::move(next);
    }

    Real sum(0L, bits);
    for (const auto& v : tr.states.back())
        sum += v;
    tr.invariant_estimate = sum / static_cast<long>(tr.states.back().size());
    return tr;
}

struct InvariantMean
{
    Real value;
    /// Diameter of the final state.
    Real uncertainty;
};

inline InvariantMean invariant_mean(const MeanTypeMapping& mapping, std::span<const Real> x0,
                                    const PrecisionConfig& cfg,
                                    int max_iter = default_max_iterations)
{
    IterationTrace tr = iterate(mapping, x0, cfg, max_iter);
    if (tr.terminated_reason == TerminationReason::max_iterations)
        throw convergence_error("iteration did not converge within " + std::to_string(max_iter) +
                                " steps; last diameter " + tr.diameters.back().to_string(12));
    return {tr.invariant_estimate, tr.diameters.back()};
}

/// ¼·Var(ξ_{M₁}(K), …, ξ_{M_p}(K)) from the analytic residua.
inline Real predicted_limit(const MeanTypeMapping& mapping, const Real& k)
{
    std::vector<Real> xi;
    const int p = static_cast<int>(mapping.size());
    for (const auto& m : mapping.means())
        xi.push_back(residuum_analytic(m, k, p).value);
    return population_variance(xi) / 4L;
}

struct LimitVerdict
{
    Real empirical_limit;
    Real predicted_limit;
    Real relative_gap;
    Real invariant_mean;
    /// Usable ratios in the trace; the median runs over the last three.
    std::size_t n_ratios_used = 0;
    bits_t precision_bits = 0;
};

struct VerifyOutcome
{
    IterationTrace trace;
    /// Absent when the iteration reached an exactly constant vector.
    std::optional<LimitVerdict> verdict;
};

constexpr std::size_t ratio_median_window = 3;

/// Verdict for a finished trace: the median of its last three usable
/// ratios against the predicted limit at the trace's own invariant mean
/// estimate. Empty when the trace collapsed to an exactly constant vector.
inline std::optional<LimitVerdict> limit_verdict(const MeanTypeMapping& mapping,
                                                 const IterationTrace& tr)
{
    if (tr.terminated_reason == TerminationReason::became_constant)
        return std::nullopt;
    auto idx = tr.usable_ratio_indices();
    if (idx.size() < ratio_median_window)
        throw insufficient_ratios_error(
            "only " + std::to_string(idx.size()) + " usable ratio(s) at " +
            std::to_string(tr.config.working_bits) + " bits; raise working_bits");

    std::vector<Real> tail;
    for (std::size_t k = idx.size() - ratio_median_window; k < idx.size(); ++k)
        tail.push_back(*tr.ratios[idx[k]]);
    std::sort(tail.begin(), tail.end(), [](const Real& a, const Real& b) { return a < b; });

    LimitVerdict v;
    v.empirical_limit = tail[tail.size() / 2];
    v.invariant_mean = tr.invariant_estimate;
    v.predicted_limit = predicted_limit(mapping, tr.invariant_estimate);
    Real floor = tr.config.tolerance();
    v.relative_gap = abs(v.empirical_limit - v.predicted_limit) / max(abs(v.predicted_limit), floor);
    v.n_ratios_used = idx.size();
    v.precision_bits = tr.config.working_bits;
    return v;
}

inline VerifyOutcome verify_limit(const MeanTypeMapping& mapping, std::span<const Real> x0,
                                  const PrecisionConfig& cfg,
                                  int max_iter = default_max_iterations)
{
    VerifyOutcome out{iterate(mapping, x0, cfg, max_iter), std::nullopt};
    out.verdict = limit_verdict(mapping, out.trace);
    return out;
}

struct SuperlinearityReport
{
    bool exact_collapse = false;
    bool enough_states = false;
    std::vector<Real> quotients;
    std::optional<Real> final_quotient;
    bool contracting = false;
    /// log(1/Var) at the last usable step divided by the one before.
    std::optional<Real> log_variance_growth;
    bool doubling = false;
    std::string message;
};

/// Diameter quotients diam₍ₙ₊₁₎/diamₙ must head to zero (the last one below
/// `threshold`) and log(1/Var) must at least double between the last two
/// usable steps.
inline SuperlinearityReport superlinearity_check(const IterationTrace& tr, double threshold = 1e-3)
{
    SuperlinearityReport r;
    if (tr.terminated_reason == TerminationReason::became_constant) {
        r.exact_collapse = true;
        r.contracting = true;
        r.message = "exact collapse after " + std::to_string(tr.states.size() - 1) + " step(s)";
        return r;
    }
    r.enough_states = tr.states.size() >= 4;
    if (!r.enough_states) {
        r.message = "trace too short (need at least 4 states)";
        return r;
    }
    for (std::size_t n = 0; n + 1 < tr.diameters.size(); ++n)
        if (tr.diameters[n] > 0L)
            r.quotients.push_back(tr.diameters[n + 1] / tr.diameters[n]);
    if (!r.quotients.empty()) {
        r.final_quotient = r.quotients.back();
        r.contracting = compare(*r.final_quotient, threshold) < 0;
    }

    const Real floor = tr.usable_floor();
    std::vector<std::size_t> usable;
    for (std::size_t n = 0; n < tr.variances.size(); ++n)
        if (tr.variances[n] > floor)
            usable.push_back(n);
    if (usable.size() >= 2) {
        const Real& a = tr.variances[usable[usable.size() - 2]];
        const Real& b = tr.variances[usable.back()];
        if (a < 1L && b < 1L) {
            Real growth = log(b) / log(a);
            r.doubling = growth >= 2L;
            r.log_variance_growth = std::move(growth);
        }
    }
    r.message = r.contracting ? (r.doubling ? "quadratic" : "superlinear")
                              : "non-contracting: diameter quotient stays at " +
                                    (r.final_quotient ? r.final_quotient->to_string(6) : "n/a");
    return r;
}

} // namespace meaniter

#pragma once

#include "json.hpp"

#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "meaniter/catalog.hpp"
#include "meaniter/gauss_iteration.hpp"
#include "meaniter/mean_families.hpp"
#include "meaniter/residuum.hpp"

// JSON and CSV plumbing. Every number crosses the boundary as a decimal
// string; JSON numbers are accepted on input and read through their
// shortest decimal spelling, so 0.1 means the decimal 0.1.

namespace meaniter::io {

using json = nlohmann::json;

inline std::string decimal_text(const json& j, const std::string& what)
{
    if (j.is_string())
        return j.get<std::string>();
    if (j.is_number())
        return j.dump();
    throw parse_error(what + " must be a number or a decimal string");
}

inline Real real_from_json(const json& j, bits_t bits, const std::string& what,
                           bool allow_infinite = false)
{
    try {
        return Real::parse(decimal_text(j, what), bits, allow_infinite);
    } catch (const parse_error& e) {
        throw parse_error(what + ": " + e.what());
    }
}

inline std::vector<Real> vector_from_json(const json& j, bits_t bits, const std::string& what)
{
    if (!j.is_array() || j.empty())
        throw parse_error(what + " must be a non-empty array");
    std::vector<Real> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(real_from_json(j[i], bits, what + "[" + std::to_string(i) + "]"));
    return out;
}

inline Param param_from_json(const json& j, const std::string& what)
{
    if (j.is_number_integer())
        return Param(j.get<long>());
    return Param::parse(decimal_text(j, what));
}

inline double bound_from_json(const json& j, const std::string& what)
{
    Real r = real_from_json(j, 64, what, true);
    if (!r.is_finite())
        return r.sign() > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
    return r.to_double();
}

inline const json& require(const json& j, const char* key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key))
        throw parse_error(where + " needs \"" + key + "\"");
    return j.at(key);
}

inline std::string string_field(const json& j, const char* key, const std::string& where)
{
    const json& v = require(j, key, where);
    if (!v.is_string())
        throw parse_error(where + ": \"" + key + "\" must be a string");
    return v.get<std::string>();
}

/// {"family": "gini", "alpha": 2, "beta": 1} and friends. Families:
/// arithmetic, geometric, power(alpha), gini(alpha, beta),
/// quasiarithmetic(generator), bajraktarevic(f, g),
/// quasideviation(deviation). Optional "domain": [lo, hi], with "inf"
/// and "-inf" allowed as bounds.
inline MeanSpec mean_from_json(const json& j)
{
    const std::string where = "mean";
    if (!j.is_object())
        throw parse_error("mean must be a JSON object");
    std::string fam = string_field(j, "family", where);

    std::optional<Interval> dom;
    if (j.contains("domain")) {
        const json& d = j.at("domain");
        if (!d.is_array() || d.size() != 2)
            throw parse_error("mean domain must be [lo, hi]");
        Interval iv{bound_from_json(d[0], "domain lo"), bound_from_json(d[1], "domain hi")};
        iv.validate();
        dom = iv;
    }
    auto restrict = [&](MeanSpec m) { return dom ? m.restricted_to(*dom) : m; };

    if (fam == "arithmetic")
        return restrict(MeanSpec::arithmetic());
    if (fam == "geometric")
        return restrict(MeanSpec::geometric());
    if (fam == "power")
        return restrict(MeanSpec::power(param_from_json(require(j, "alpha", where), "alpha")));
    if (fam == "gini")
        return restrict(MeanSpec::gini(param_from_json(require(j, "alpha", where), "alpha"),
                                       param_from_json(require(j, "beta", where), "beta")));
    if (fam == "quasiarithmetic")
        return restrict(MeanSpec::quasi_arithmetic(catalog::generator(string_field(j, "generator", where))));
    if (fam == "bajraktarevic")
    {
        std::string fs = string_field(j, "f", where), gs = string_field(j, "g", where);
        Interval natural = intersect(catalog::function(fs).domain(), catalog::function(gs).domain());
        return restrict(catalog::on_natural_or_positive(natural, [&](const Interval& dom) {
            return MeanSpec::bajraktarevic(catalog::function(fs, dom), catalog::function(gs, dom));
        }));
    }
    if (fam == "quasideviation")
        return restrict(MeanSpec::quasideviation(catalog::deviation(string_field(j, "deviation", where))));
    throw parse_error("unknown mean family '" + fam + "'");
}

inline MeanTypeMapping mapping_from_json(const json& j)
{
    if (!j.is_array() || j.size() < 2)
        throw parse_error("mapping must be an array of at least two means");
    std::vector<MeanSpec> means;
    for (const auto& m : j)
        means.push_back(mean_from_json(m));
    return MeanTypeMapping(std::move(means));
}

/// Full round-trip digits when digits <= 0.
inline std::string decimal(const Real& v, int digits = 0)
{
    return digits > 0 ? v.to_string(digits) : v.to_string();
}

inline json estimate_to_json(const ResiduumEstimate& e, int digits = 0)
{
    json j = {{"value", decimal(e.value, digits)},
              {"uncertainty", e.uncertainty.to_string(6)},
              {"method", to_string(e.method)},
              {"p", e.p_used}};
    if (!e.warnings.empty())
        j["warnings"] = e.warnings;
    return j;
}

inline json comparison_to_json(const ResiduumComparison& c, int digits = 0)
{
    json j;
    j["analytic"] = estimate_to_json(c.analytic, digits);
    j["limit_extrapolation"] = c.limit ? estimate_to_json(*c.limit, digits) : json(nullptr);
    j["hessian_fd"] = c.hessian ? json::array({estimate_to_json(c.hessian->mixed, digits),
                                               estimate_to_json(c.hessian->pure, digits)})
                                : json(nullptr);
    j["agreement"] = {{"limit_vs_analytic", c.limit_agrees},
                      {"hessian_vs_analytic", c.hessian_agrees},
                      {"hessian_forms", c.hessian ? c.hessian->agree() : false}};
    j["warnings"] = c.warnings;
    return j;
}

inline json residuality_to_json(const ResidualityReport& r, int digits = 0)
{
    json j;
    j["exact"] = r.exact;
    j["fitted_exponent"] = r.exact ? json("inf") : json(r.fitted_exponent.to_string(12));
    j["fitted_scale"] = r.exact ? json(nullptr) : json(r.fitted_scale.to_string(12));
    j["residuum_used"] = decimal(r.residuum_used, digits);
    j["directions_used"] = r.directions_used;
    json rows = json::array();
    for (std::size_t i = 0; i < r.radii_used.size(); ++i)
        rows.push_back({{"r", r.radii_used[i].to_string(12)}, {"defect", r.defects[i].to_string(12)}});
    j["defects"] = rows;
    return j;
}

inline json p_independence_to_json(const PIndependenceReport& r, int digits = 0)
{
    json j;
    j["estimates"] = json::array();
    for (const auto& e : r.estimates)
        j["estimates"].push_back(estimate_to_json(e, digits));
    j["pairs"] = json::array();
    for (const auto& pr : r.pairs)
        j["pairs"].push_back({{"p", pr.p},
                              {"q", pr.q},
                              {"difference", pr.difference.to_string(6)},
                              {"tolerance", pr.tolerance.to_string(6)},
                              {"consistent", pr.consistent}});
    j["max_difference"] = r.max_difference.to_string(6);
    j["consistent"] = r.consistent();
    return j;
}

/// {empirical_limit, predicted_limit, relative_gap, K, precision_bits}.
inline json verdict_to_json(const LimitVerdict& v)
{
    json j;
    j["empirical_limit"] = v.empirical_limit.to_string();
    j["predicted_limit"] = v.predicted_limit.to_string();
    j["relative_gap"] = v.relative_gap.to_string(17);
    j["K"] = v.invariant_mean.to_string();
    j["precision_bits"] = v.precision_bits;
    return j;
}

/// Columns n, y_1 … y_p, variance, diameter, ratio. The ratio on row n is
/// Var y⁽ⁿ⁾ / (Var y⁽ⁿ⁻¹⁾)² and is empty on row 0 and wherever the previous
/// variance was below the usable floor.
inline std::string trace_to_csv(const IterationTrace& tr)
{
    std::ostringstream os;
    const std::size_t p = tr.states.empty() ? 0 : tr.states.front().size();
    os << "n";
    for (std::size_t i = 1; i <= p; ++i)
        os << ",y_" << i;
    os << ",variance,diameter,ratio\n";
    for (std::size_t n = 0; n < tr.states.size(); ++n) {
        os << n;
        for (const auto& y : tr.states[n])
            os << ',' << y.to_string();
        os << ',' << tr.variances[n].to_string() << ',' << tr.diameters[n].to_string() << ',';
        if (n > 0 && tr.ratios[n - 1])
            os << tr.ratios[n - 1]->to_string();
        os << '\n';
    }
    return os.str();
}

} // namespace meaniter::io

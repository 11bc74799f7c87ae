#pragma once

#include <cctype>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meaniter/functions.hpp"
#include "meaniter/param.hpp"
#include "meaniter/real.hpp"

// Built-in generator and deviation functions, addressed by text.
//
// Generator grammar (whitespace ignored):
//
//   expr   := ['+'|'-'] term { ('+'|'-') term }
//   term   := factor { '*' factor }
//   factor := number | 'x' ['^' exponent] | 'log' ['(x)'] | 'xlogx'
//           | 'exp' ['(' ['-'] [number '*'] 'x' ')'] | '(' expr ')'
//
// so "x^2", "log", "exp(2*x)", "x^2*log(x)", "0.5*x + exp(x)" and "x^(-1)"
// are all accepted. Deviations are "difference:<f>" for f(x) − f(u) and
// "bajraktarevic:<f>,<g>" for g(u)f(x) − f(u)g(x).

namespace meaniter::catalog {

/// Value with first and second derivative.
struct Jet
{
    Real v, d1, d2;
};

/// A parsed generator expression: jet evaluator plus natural domain.
struct Expr
{
    std::function<Jet(const Real&)> jet;
    Interval domain;
};

namespace detail {

inline Expr constant(Param c)
{
    return {[c](const Real& x) {
                bits_t b = x.precision();
                return Jet{c.value(b), Real(0L, b), Real(0L, b)};
            },
            Interval::real_line()};
}

inline Expr power(Param r)
{
    if (auto n = r.as_integer()) {
        long k = *n;
        if (k == 0)
            return constant(Param(1L));
        Interval dom = k > 0 ? Interval::real_line() : Interval::positive();
        return {[k](const Real& x) {
                    bits_t b = x.precision();
                    Real d2 = k == 1 ? Real(0L, b) : k * (k - 1) * pow(x, k - 2);
                    return Jet{pow(x, k), k * pow(x, k - 1), std::move(d2)};
                },
                dom};
    }
    return {[r](const Real& x) {
                Real e = r.value(x.precision());
                Real v = pow(x, e);
                Real d1 = e * v / x;
                return Jet{v, d1, (e - 1L) * d1 / x};
            },
            Interval::positive()};
}

inline Expr logarithm()
{
    return {[](const Real& x) {
                Real inv = 1L / x;
                return Jet{log(x), inv, -(inv * inv)};
            },
            Interval::positive()};
}

inline Expr exponential(Param a)
{
    return {[a](const Real& x) {
                Real c = a.value(x.precision());
                Real e = exp(c * x);
                Real d1 = c * e;
                return Jet{e, d1, c * d1};
            },
            Interval::real_line()};
}

inline Expr product(Expr a, Expr b)
{
    Interval dom = intersect(a.domain, b.domain);
    return {[a = std::move(a.jet), b = std::move(b.jet)](const Real& x) {
                Jet u = a(x), w = b(x);
                return Jet{u.v * w.v, u.d1 * w.v + u.v * w.d1,
                           u.d2 * w.v + 2L * (u.d1 * w.d1) + u.v * w.d2};
            },
            dom};
}

inline Expr sum(Expr a, Expr b, long sign)
{
    Interval dom = intersect(a.domain, b.domain);
    return {[a = std::move(a.jet), b = std::move(b.jet), sign](const Real& x) {
                Jet u = a(x), w = b(x);
                return Jet{u.v + sign * w.v, u.d1 + sign * w.d1, u.d2 + sign * w.d2};
            },
            dom};
}

inline Expr negate(Expr a)
{
    return {[a = std::move(a.jet)](const Real& x) {
                Jet u = a(x);
                return Jet{-u.v, -u.d1, -u.d2};
            },
            a.domain};
}

class Parser
{
public:
    explicit Parser(std::string_view text) : src_(text) {}

    Expr parse()
    {
        Expr e = expr();
        skip();
        if (pos_ != src_.size())
            fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        return e;
    }

private:
    Expr expr()
    {
        long sign = 1;
        if (accept('-'))
            sign = -1;
        else
            accept('+');
        Expr e = term();
        if (sign < 0)
            e = negate(std::move(e));
        for (;;) {
            if (accept('+'))
                e = sum(std::move(e), term(), 1);
            else if (accept('-'))
                e = sum(std::move(e), term(), -1);
            else
                return e;
        }
    }

    Expr term()
    {
        Expr e = factor();
        while (accept('*'))
            e = product(std::move(e), factor());
        return e;
    }

    Expr factor()
    {
        skip();
        if (pos_ >= src_.size())
            fail("unexpected end of expression");
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return constant(number());
        if (accept('(')) {
            Expr e = expr();
            expect(')');
            return e;
        }
        if (keyword("xlogx"))
            return product(power(Param(1L)), logarithm());
        if (keyword("exp")) {
            if (!accept('('))
                return exponential(Param(1L));
            Param a(1L);
            bool neg = accept('-');
            skip();
            if (pos_ < src_.size() && src_[pos_] != 'x') {
                a = number();
                expect('*');
            }
            if (neg)
                a = Param::parse("-" + a.text());
            expect('x');
            expect(')');
            return exponential(a);
        }
        if (keyword("log")) {
            if (accept('(')) {
                expect('x');
                expect(')');
            }
            return logarithm();
        }
        if (accept('x')) {
            if (!accept('^'))
                return power(Param(1L));
            if (accept('(')) {
                Param r = signed_number();
                expect(')');
                return power(r);
            }
            return power(signed_number());
        }
        fail("unknown token at '" + std::string(src_.substr(pos_)) + "'");
    }

    Param signed_number()
    {
        skip();
        bool neg = accept('-');
        if (!neg)
            accept('+');
        Param p = number();
        return neg ? Param::parse("-" + p.text()) : p;
    }

    Param number()
    {
        skip();
        std::size_t start = pos_;
        auto digit = [&] {
            return pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]));
        };
        while (digit() || (pos_ < src_.size() && src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E') &&
            pos_ + 1 < src_.size() &&
            (std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '-' ||
             src_[pos_ + 1] == '+')) {
            ++pos_;
            if (src_[pos_] == '-' || src_[pos_] == '+')
                ++pos_;
            while (digit())
                ++pos_;
        }
        if (start == pos_)
            fail("expected a number");
        return Param::parse(src_.substr(start, pos_ - start));
    }

    bool keyword(std::string_view kw)
    {
        skip();
        if (src_.substr(pos_, kw.size()) != kw)
            return false;
        pos_ += kw.size();
        return true;
    }

    bool accept(char c)
    {
        skip();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c))
            fail(std::string("expected '") + c + "'");
    }

    void skip()
    {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw parse_error("generator expression '" + std::string(src_) + "': " + what);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

inline std::string trim(std::string_view s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return std::string(s.substr(a, b - a));
}

} // namespace detail

inline Expr parse_expression(std::string_view text) { return detail::Parser(text).parse(); }

/// Calls build(natural); if that fails an axiom check and the natural
/// domain reaches below zero, retries on its positive part. This is how
/// "x^2" becomes a generator on (0, inf) and "bajraktarevic:x^2,x" a
/// deviation there.
template <class Build>
auto on_natural_or_positive(const Interval& natural, Build&& build)
{
    try {
        return build(natural);
    } catch (const axiom_error&) {
        if (natural.subset_of(Interval::positive()))
            throw;
        return build(intersect(natural, Interval::positive()));
    }
}

namespace detail {

inline GeneratorFunction make_function(const std::string& name, std::shared_ptr<const Expr> e,
                                       const Interval& dom, bool monotone)
{
    return GeneratorFunction(
        name, [e](const Real& x) { return e->jet(x).v; },
        [e](const Real& x) { return e->jet(x).d1; }, [e](const Real& x) { return e->jet(x).d2; },
        dom, monotone);
}

} // namespace detail

/// Smooth function from a catalog expression, no monotonicity required.
inline GeneratorFunction function(std::string_view text, std::optional<Interval> domain = {})
{
    std::string name = detail::trim(text);
    auto e = std::make_shared<const Expr>(parse_expression(name));
    Interval dom = domain ? intersect(*domain, e->domain) : e->domain;
    return detail::make_function(name, e, dom, false);
}

/// Strictly monotone generator from a catalog expression such as "exp",
/// "log" or "x^2", on its natural domain or, failing that, its positive part.
inline GeneratorFunction generator(std::string_view text)
{
    std::string name = detail::trim(text);
    auto e = std::make_shared<const Expr>(parse_expression(name));
    return on_natural_or_positive(e->domain, [&](const Interval& dom) {
        return detail::make_function(name, e, dom, true);
    });
}

/// E(x, u) = f(x) − f(u); its deviation mean is the quasiarithmetic mean of
/// an increasing f.
inline DeviationFunction difference_deviation(const GeneratorFunction& f)
{
    return DeviationFunction(
        "difference:" + f.name(), [f](const Real& x, const Real& u) { return f(x) - f(u); },
        [f](const Real& x, const Real&) { return f.d1(x); },
        [f](const Real& x, const Real&) { return f.d2(x); }, f.domain());
}

/// E(x, u) = g(u)f(x) − f(u)g(x); its deviation mean is the Bajraktarević
/// mean of (f, g).
inline DeviationFunction bajraktarevic_deviation(const GeneratorFunction& f,
                                                 const GeneratorFunction& g,
                                                 std::optional<Interval> domain = {})
{
    Interval dom = intersect(f.domain(), g.domain());
    if (domain)
        dom = intersect(dom, *domain);
    return DeviationFunction(
        "bajraktarevic:" + f.name() + "," + g.name(),
        [f, g](const Real& x, const Real& u) { return g(u) * f(x) - f(u) * g(x); },
        [f, g](const Real& x, const Real& u) { return g(u) * f.d1(x) - f(u) * g.d1(x); },
        [f, g](const Real& x, const Real& u) { return g(u) * f.d2(x) - f(u) * g.d2(x); }, dom);
}

/// Splits "f,g" at the comma that is not inside parentheses.
inline std::pair<std::string, std::string> split_pair(const std::string& args)
{
    int depth = 0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        char c = args[i];
        depth += c == '(' ? 1 : c == ')' ? -1 : 0;
        if (c == ',' && depth == 0)
            return {args.substr(0, i), args.substr(i + 1)};
    }
    throw parse_error("'" + args + "' should be two expressions 'f,g'");
}

/// Deviation from a catalog name: "difference:<f>" or "bajraktarevic:<f>,<g>".
inline DeviationFunction deviation(std::string_view text)
{
    std::string name = detail::trim(text);
    auto colon = name.find(':');
    if (colon == std::string::npos)
        throw parse_error("deviation '" + name + "' needs a 'kind:' prefix");
    std::string kind = name.substr(0, colon);
    std::string args = name.substr(colon + 1);
    if (kind == "difference")
        return difference_deviation(generator(args));
    if (kind == "bajraktarevic") {
        auto [fs, gs] = split_pair(args);
        GeneratorFunction f = function(fs), g = function(gs);
        return on_natural_or_positive(intersect(f.domain(), g.domain()), [&](const Interval& dom) {
            return bajraktarevic_deviation(f, g, dom);
        });
    }
    throw parse_error("unknown deviation kind '" + kind + "'");
}

/// Representative catalog deviations, all defined on (0, inf) at least.
inline std::vector<std::string> sample_deviation_names()
{
    return {"difference:x",          "difference:log",         "difference:exp",
            "difference:x^3",        "difference:-1*x^-1",     "bajraktarevic:x^2,x",
            "bajraktarevic:x,1",     "bajraktarevic:x^2*log(x),x^2", "bajraktarevic:x^0.5,x^-1",
            "bajraktarevic:exp(2*x),exp(x)"};
}

} // namespace meaniter::catalog

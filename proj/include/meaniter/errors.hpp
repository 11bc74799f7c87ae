#pragma once

#include <stdexcept>
#include <string>

namespace meaniter {

/// Root of every error thrown by the library.
class error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of an operation: log of a
/// nonpositive number, division by exact zero, a vector entry outside the
/// mean's interval, a mean value escaping the mapping's domain.
class domain_error : public error
{
public:
    using error::error;
};

/// A bracketing root finder saw no sign change. For quasideviation means
/// this means the deviation violates the sign condition (D1); for
/// quasiarithmetic inversion it means the generator is not monotone.
class bracket_error : public error
{
public:
    using error::error;
};

/// A user supplied generator, deviation or mean failed a spot check of one
/// of its defining axioms.
class axiom_error : public error
{
public:
    using error::error;
};

/// A numerical procedure did not settle: the extrapolation table diverged,
/// the two Hessian forms disagreed, or the iteration hit max_iter.
class convergence_error : public error
{
public:
    using error::error;
};

/// The trace contains fewer usable ratios than a verdict needs.
class insufficient_ratios_error : public convergence_error
{
public:
    using convergence_error::convergence_error;
};

/// Malformed decimal string, JSON document or catalog expression.
class parse_error : public error
{
public:
    using error::error;
};

} // namespace meaniter

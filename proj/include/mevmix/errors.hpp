#pragma once

#include <stdexcept>
#include <string>

namespace mevmix {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller violated a documented precondition (bad dimension, bad bound, ...).
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(what) {}
};

/// A point lies outside the support of the requested density or transform.
class SupportError : public Error {
public:
    explicit SupportError(const std::string& what) : Error(what) {}
};

/// A model configuration makes the requested operation meaningless
/// (e.g. a tail with essentially zero probability mass).
class DegenerateConfigError : public Error {
public:
    explicit DegenerateConfigError(const std::string& what) : Error(what) {}
};

/// Automatic initialization could not produce a usable starting point.
class InitializationError : public Error {
public:
    explicit InitializationError(const std::string& what) : Error(what) {}
};

/// An iterative numeric procedure failed to make progress
/// (e.g. a slice sampler shrinking without bound).
class NumericPathologyError : public Error {
public:
    explicit NumericPathologyError(const std::string& what) : Error(what) {}
};

/// A data file could not be read or parsed.
class LoadError : public Error {
public:
    explicit LoadError(const std::string& what) : Error(what) {}
};

/// A regression design matrix is rank deficient.
class RankDeficiencyError : public Error {
public:
    explicit RankDeficiencyError(const std::string& what) : Error(what) {}
};

} // namespace mevmix

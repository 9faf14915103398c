#pragma once

#include <stdexcept>
#include <string>

namespace tsf {

/// Base class for library failures that are not argument-contract violations.
/// Precondition violations throw std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent on-disk data (bundles, configs, manifests).
class FormatError : public Error {
public:
    using Error::Error;
};

/// An optimization run produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Classifier training failed to produce a usable model.
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace tsf

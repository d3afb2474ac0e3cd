#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mcfpinn {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layer sizes, point dimensions or buffer shapes do not line up.
class InvalidShape : public Error {
public:
    using Error::Error;
};

/// A scalar argument lies outside its admissible range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A loss, gradient or parameter became non-finite during optimization.
class TrainingDivergence : public Error {
public:
    using Error::Error;
};

/// The Monte Carlo estimator saw a non-finite field value.
class EstimatorFailure : public Error {
public:
    using Error::Error;
};

/// Relative error requested against a reference with zero norm.
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

/// Checkpoint file could not be read back.
class CheckpointError : public Error {
public:
    CheckpointError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Malformed run configuration. `line` is 0 when the problem is not tied to a line.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string key = {}, int line = 0)
        : Error(what), key_(std::move(key)), line_(line) {}

    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

namespace detail {

template <class E>
inline void require(bool cond, const char* msg) {
    if (!cond) throw E(msg);
}

}  // namespace detail
}  // namespace mcfpinn

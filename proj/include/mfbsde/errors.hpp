#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfbsde {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Non-finite value or blow-up during backward or forward stepping.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(std::size_t step, double condition)
        : std::runtime_error("singular regression system at step " + std::to_string(step) +
                             " (condition estimate " + std::to_string(condition) + ")"),
          step_(step), condition_(condition) {}
    std::size_t step() const noexcept { return step_; }
    double condition() const noexcept { return condition_; }

private:
    std::size_t step_;
    double condition_;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::string key = {})
        : std::runtime_error(what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

} // namespace mfbsde

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ioncav {

/// Base class for every failure raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Linearized fluctuations have no strictly stable steady state.
class NoSteadyState : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

/// A trajectory produced a non-finite component (or left the model domain).
class NonFiniteError : public Error {
public:
    NonFiniteError(std::size_t trajectory, double time, const std::string& what)
        : Error(what), trajectory_(trajectory), time_(time) {}

    std::size_t trajectory() const noexcept { return trajectory_; }
    double time() const noexcept { return time_; }

private:
    std::size_t trajectory_;
    double time_;
};

class DegenerateComponent : public Error {
public:
    using Error::Error;
};

/// First-passage run ended with too few trajectories crossing.
class TimeoutError : public Error {
public:
    TimeoutError(double crossed_fraction, const std::string& what)
        : Error(what), crossed_fraction_(crossed_fraction) {}

    double crossed_fraction() const noexcept { return crossed_fraction_; }

private:
    double crossed_fraction_;
};

class TruncationInadequate : public Error {
public:
    using Error::Error;
};

}  // namespace ioncav

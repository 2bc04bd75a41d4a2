#pragma once

#include <stdexcept>
#include <string>

namespace lanekeep {

/// Invalid or inconsistent configuration (unknown scenario, bad rate, empty dataset).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// The robot left the neighbourhood of the course; aborts the run.
class LocalizationError : public std::runtime_error {
public:
  explicit LocalizationError(const std::string& what) : std::runtime_error(what) {}
};

/// A caller broke an operation's precondition (dimension mismatch, out-of-order spikes).
class ContractError : public std::logic_error {
public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// A network whose normalization factor is zero in some layer.
class DegenerateNetworkError : public std::runtime_error {
public:
  explicit DegenerateNetworkError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lanekeep

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace polyhaz {

// Argument outside the domain of a hazard or density (non-finite, non-positive).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed user input. line() is 1-based, 0 when not tied to a line.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A likelihood, gradient or ratio evaluated to a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t observation)
      : std::runtime_error(what + " (observation " + std::to_string(observation) + ")"),
        observation_(observation) {}
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what), observation_(static_cast<std::size_t>(-1)) {}
  std::size_t observation() const noexcept { return observation_; }

 private:
  std::size_t observation_;
};

// Attempt to grow the model beyond K_max.
class CapacityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Inconsistent configuration (rates, probabilities, hyperparameters).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace polyhaz

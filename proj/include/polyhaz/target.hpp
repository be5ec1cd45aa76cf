#pragma once

#include <cstdint>
#include <span>

namespace polyhaz {

using Velocity = std::int8_t;

/// Differentiable potential U = -log(target density) seen by the Zig-Zag
/// dynamics. Coordinates with zero velocity are frozen (stuck at the spike)
/// and are not queried.
class PotentialTarget {
 public:
  virtual ~PotentialTarget() = default;

  virtual std::size_t dimension() const = 0;

  /// Writes dU/dtheta_i into grad[i] for every i with velocity[i] != 0.
  /// Entries for frozen coordinates are set to 0.
  virtual void gradient(std::span<const double> theta, std::span<const Velocity> velocity,
                        std::span<double> grad) const = 0;
};

}  // namespace polyhaz

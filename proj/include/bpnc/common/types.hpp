#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bpnc {

using NodeId = std::uint8_t;
using ChannelIndex = std::uint8_t;
using FlowIndex = std::uint8_t;

/// Simulation time in integer microseconds.
using SimTime = std::int64_t;

constexpr SimTime kMicrosPerSecond = 1'000'000;

constexpr SimTime seconds(double s) {
  return static_cast<SimTime>(s * static_cast<double>(kMicrosPerSecond) + (s >= 0 ? 0.5 : -0.5));
}

constexpr double to_seconds(SimTime t) {
  return static_cast<double>(t) / static_cast<double>(kMicrosPerSecond);
}

/// Raised for invalid scenario or command-line configuration. `field` names
/// the offending setting so the CLI can report it.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace bpnc

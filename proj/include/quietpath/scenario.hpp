#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "quietpath/errors.hpp"
#include "quietpath/flight_dynamics.hpp"
#include "quietpath/noise.hpp"

namespace quietpath {

inline constexpr double deg(double degrees) {
  return degrees * std::numbers::pi / 180.0;
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v, double tol = 0.0) const {
    return v >= lower - tol && v <= upper + tol;
  }
  double violation(double v) const {
    return std::max({0.0, lower - v, v - upper});
  }
};

/// Operational envelope a <= C(z, u) <= b on (gamma, V, chi, alpha, delta_x,
/// mu). The speed floor must respect 1.3 times the stall speed.
struct PathBounds {
  Interval gamma{deg(-8.0), deg(3.0)};
  Interval V{1.3 * 70.0, 180.0};
  Interval chi{deg(-30.0), deg(30.0)};
  Interval alpha{deg(-2.0), deg(12.0)};
  Interval delta_x{0.1, 1.0};
  Interval mu{deg(-25.0), deg(25.0)};
  double stall_speed = 70.0;
  // Not an operational limit: keeps iterates inside the density-law domain.
  Interval height{0.0, 11000.0};
};

/// Fixed initial (x, y, h, V) and final (x, y, h) values.
struct BoundaryConditions {
  double x0 = 0.0;
  double y0 = 0.0;
  double h0 = 3500.0;
  double V0 = 160.0;
  double xf = 60000.0;
  double yf = 5000.0;
  double hf = 500.0;
};

enum class Variant { noise, fuel, noise_fuel_capped, minimax };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::noise: return "noise";
    case Variant::fuel: return "fuel";
    case Variant::noise_fuel_capped: return "noise_fuel_capped";
    case Variant::minimax: return "minimax";
  }
  return "unknown";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "noise") return Variant::noise;
  if (s == "fuel") return Variant::fuel;
  if (s == "noise_fuel_capped" || s == "capped") return Variant::noise_fuel_capped;
  if (s == "minimax") return Variant::minimax;
  throw ValidationError("unknown variant '" + s +
                        "' (expected noise, fuel, noise_fuel_capped, minimax)");
}

struct Scenario {
  BoundaryConditions boundary;
  double initial_time = 0.0;
  double final_time = 600.0;
  int intervals = 100;
  PathBounds bounds;
  std::vector<Observer> observers{{0.0, 0.0}};
  Variant variant = Variant::noise;
  double fuel_cap_factor = 1.1;
  AircraftModel aircraft;
  Atmosphere atmosphere;
  NoiseModel noise;
  // Multi-start: the deterministic guess plus `starts - 1` perturbed copies.
  int starts = 1;
  std::uint64_t seed = 0;
  double perturbation = 0.05;

  /// Horizontal axis from the initial to the final point, rad.
  double track_heading() const {
    return std::atan2(boundary.yf - boundary.y0, boundary.xf - boundary.x0);
  }

  /// Noise model with the track axis filled in when not set explicitly.
  NoiseModel resolved_noise() const {
    NoiseModel n = noise;
    if (!n.track_heading) n.track_heading = track_heading();
    return n;
  }

  void validate() const {
    if (!(final_time > initial_time)) {
      throw ValidationError("scenario: final_time must exceed initial_time");
    }
    if (intervals < 2) throw ValidationError("scenario: need N >= 2 intervals");
    const std::pair<const char*, const Interval*> named[] = {
        {"gamma", &bounds.gamma}, {"V", &bounds.V},
        {"chi", &bounds.chi},     {"alpha", &bounds.alpha},
        {"delta_x", &bounds.delta_x}, {"mu", &bounds.mu},
        {"height", &bounds.height}};
    for (const auto& [name, iv] : named) {
      if (!(iv->lower < iv->upper)) {
        throw ValidationError(std::string("bounds.") + name +
                              ": lower must be below upper");
      }
    }
    if (bounds.V.lower < 1.3 * bounds.stall_speed - 1e-9) {
      throw ValidationError("bounds.V: lower bound below 1.3 * stall speed");
    }
    if (bounds.delta_x.lower < 0.0 || bounds.delta_x.upper > 1.0) {
      throw ValidationError("bounds.delta_x must lie within [0, 1]");
    }
    if (!bounds.V.contains(boundary.V0)) {
      throw ValidationError("boundary.V0 outside the speed bounds");
    }
    if (!bounds.height.contains(boundary.h0) || !bounds.height.contains(boundary.hf)) {
      throw ValidationError("boundary heights outside the height bounds");
    }
    if (variant != Variant::fuel && observers.empty()) {
      throw ValidationError("scenario: noise variants need at least one observer");
    }
    if (variant == Variant::noise_fuel_capped && !(fuel_cap_factor > 0.0)) {
      throw ValidationError("scenario: fuel_cap_factor must be positive");
    }
    if (starts < 1) throw ValidationError("scenario: starts must be >= 1");
    aircraft.validate();
    atmosphere.validate();
    noise.engine.validate(bounds.V.upper);
    if (bounds.height.upper >= atmosphere.ceiling()) {
      throw ValidationError("bounds.height upper limit beyond the atmosphere law");
    }
  }
};

}  // namespace quietpath

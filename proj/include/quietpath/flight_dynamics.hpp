#pragma once

// Point-mass descent model: closed-form atmosphere, speed-dependent thrust,
// parabolic-polar aerodynamics and the six flight equations about the centre
// of mass (constant weight, symmetric flight, constant gravity).
//
// Every formula is templated on the scalar type so the transcription can
// differentiate through it with ad::Jet.

#include <array>
#include <cmath>
#include <string>

#include "quietpath/autodiff.hpp"
#include "quietpath/errors.hpp"

namespace quietpath {

/// Motion variables at one instant. Angles in rad, lengths in m, V in m/s.
template <typename T = double>
struct State {
  T V{};
  T gamma{};
  T chi{};
  T x{};
  T y{};
  T h{};

  static constexpr int size = 6;

  std::array<T, 6> to_array() const { return {V, gamma, chi, x, y, h}; }
  static State from_array(const std::array<T, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  friend bool operator==(const State&, const State&) = default;
};

/// Time derivative of State, component for component.
template <typename T = double>
using StateDerivative = State<T>;

/// Inputs held constant over one grid interval.
template <typename T = double>
struct Control {
  T alpha{};    // angle of attack, rad
  T delta_x{};  // throttle setting
  T mu{};       // roll angle, rad

  static constexpr int size = 3;

  std::array<T, 3> to_array() const { return {alpha, delta_x, mu}; }
  static Control from_array(const std::array<T, 3>& a) {
    return {a[0], a[1], a[2]};
  }
  friend bool operator==(const Control&, const Control&) = default;
};

/// Aircraft constants. The defaults are a representative two-engine
/// narrow-body; override them from the scenario file for a specific type.
struct AircraftModel {
  double mass = 60000.0;              // kg
  double wing_area = 122.0;           // m^2
  double lift_slope = 5.0;            // 1/rad
  double zero_lift_drag = 0.025;      // Cx0
  double induced_drag = 0.05;         // k_i
  double full_thrust = 2.0 * 117000;  // N, both engines
  double specific_fuel = 1.0e-5;      // kg/(N s)
  double gravity = 9.8;               // m/s^2
  double sea_level_density = 1.225;   // kg/m^3, reference of the thrust lapse

  void validate() const {
    const std::array<std::pair<const char*, double>, 9> fields{{
        {"mass", mass},
        {"wing_area", wing_area},
        {"lift_slope", lift_slope},
        {"zero_lift_drag", zero_lift_drag},
        {"induced_drag", induced_drag},
        {"full_thrust", full_thrust},
        {"specific_fuel", specific_fuel},
        {"gravity", gravity},
        {"sea_level_density", sea_level_density},
    }};
    for (const auto& [name, value] : fields) {
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw ValidationError(std::string("aircraft.") + name +
                              " must be finite and strictly positive");
      }
    }
  }
};

/// Troposphere law rho = rho0 (1 - lapse h)^exponent, with the speed of sound
/// tied to the same law through the ideal-gas temperature.
struct Atmosphere {
  double sea_level_density = 1.225;        // kg/m^3 (rho_ISA)
  double sea_level_sound_speed = 340.294;  // m/s (c_ISA)
  double lapse = 22.6e-6;                  // 1/m
  double exponent = 4.26;

  /// Height at which the density base reaches zero.
  double ceiling() const { return 1.0 / lapse; }

  void validate() const {
    if (!(sea_level_density > 0.0) || !(sea_level_sound_speed > 0.0) ||
        !(lapse > 0.0) || !(exponent > 0.0)) {
      throw ValidationError("atmosphere parameters must be strictly positive");
    }
  }
};

template <typename T>
T air_density(const T& h, const Atmosphere& atm) {
  using std::pow;
  const T base = 1.0 - atm.lapse * h;
  if (!(ad::value_of(base) > 0.0)) {
    throw DomainError("air_density: height " +
                      std::to_string(ad::value_of(h)) +
                      " m is above the density-law ceiling");
  }
  return atm.sea_level_density * pow(base, atm.exponent);
}

/// c = c_ISA (rho/rho_ISA)^(1/(2 exponent)): temperature follows the density
/// law with exponent/2 per unit of temperature ratio, and c ~ sqrt(temperature).
template <typename T>
T speed_of_sound(const T& h, const Atmosphere& atm) {
  using std::pow;
  const T ratio = air_density(h, atm) / atm.sea_level_density;
  return atm.sea_level_sound_speed * pow(ratio, 1.0 / (2.0 * atm.exponent));
}

template <typename T>
T thrust(const T& h, const T& V, const T& delta_x, const AircraftModel& model,
         const Atmosphere& atm) {
  const T rho = air_density(h, atm);
  const T mach = V / speed_of_sound(h, atm);
  // The lapse polynomial 1 - M + M^2/2 turns upward past M = 1.
  if (!(ad::value_of(mach) < 1.0)) {
    throw DomainError("thrust: Mach " + std::to_string(ad::value_of(mach)) +
                      " outside the subsonic validity range");
  }
  return model.full_thrust * delta_x * (rho / model.sea_level_density) *
         (1.0 - mach + 0.5 * mach * mach);
}

template <typename T>
T lift(const T& h, const T& V, const T& alpha, const AircraftModel& model,
       const Atmosphere& atm) {
  const T q = 0.5 * air_density(h, atm) * V * V;
  return q * model.wing_area * model.lift_slope * alpha;
}

template <typename T>
T drag(const T& h, const T& V, const T& alpha, const AircraftModel& model,
       const Atmosphere& atm) {
  const T q = 0.5 * air_density(h, atm) * V * V;
  const double k = model.induced_drag * model.lift_slope * model.lift_slope;
  return q * model.wing_area * (model.zero_lift_drag + k * alpha * alpha);
}

template <typename T>
StateDerivative<T> dynamics_rhs(const State<T>& s, const Control<T>& u,
                                const AircraftModel& model,
                                const Atmosphere& atm) {
  using std::abs;
  using std::cos;
  using std::sin;
  const T cos_gamma = cos(s.gamma);
  if (std::abs(ad::value_of(cos_gamma)) < 1e-9) {
    throw SingularityError("dynamics_rhs: cos(gamma) vanishes");
  }
  if (ad::value_of(s.V) < 1e-9) {
    throw SingularityError("dynamics_rhs: airspeed vanishes");
  }
  const double m = model.mass;
  const double g = model.gravity;
  const T thr = thrust(s.h, s.V, u.delta_x, model, atm);
  const T D = drag(s.h, s.V, u.alpha, model, atm);
  const T L = lift(s.h, s.V, u.alpha, model, atm);
  const T normal = thr * sin(u.alpha) + L;

  StateDerivative<T> d;
  d.V = g * ((thr * cos(u.alpha) - D) / (m * g) - sin(s.gamma));
  d.gamma = (normal * cos(u.mu) - m * g * cos_gamma) / (m * s.V);
  d.chi = normal * sin(u.mu) / (m * s.V * cos_gamma);
  d.x = s.V * cos_gamma * cos(s.chi);
  d.y = s.V * cos_gamma * sin(s.chi);
  d.h = s.V * sin(s.gamma);
  return d;
}

/// Fuel mass flow C_SR * T, kg/s.
template <typename T>
T fuel_flow(const State<T>& s, const Control<T>& u, const AircraftModel& model,
            const Atmosphere& atm) {
  return model.specific_fuel * thrust(s.h, s.V, u.delta_x, model, atm);
}

}  // namespace quietpath

#pragma once

// Jet mixing noise at a ground receiver (coaxial-nozzle semi-empirical source
// level, spherical divergence, convective/Doppler amplification), the
// equivalent continuous level over the flight, and total fuel burnt.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "quietpath/autodiff.hpp"
#include "quietpath/errors.hpp"
#include "quietpath/flight_dynamics.hpp"

namespace quietpath {

/// Coaxial-nozzle parameters of one engine. Index 1 is the inner (core)
/// stream, index 2 the outer (bypass) stream.
struct EngineNoiseParams {
  double v1 = 360.0;    // inner jet speed, m/s
  double v2 = 220.0;    // outer jet speed, m/s
  double s1 = 0.45;     // inner nozzle area, m^2
  double s2 = 1.6;      // outer nozzle area, m^2
  double tau1 = 750.0;  // inner jet temperature, K
  double tau2 = 290.0;  // outer jet temperature, K
  double rho1 = 0.47;   // inner jet density, kg/m^3
  double d = 0.9;       // nozzle diameter, m
  // Exponent of the velocity-ratio term; 1.1 sqrt(s2/s1) when unset.
  std::optional<double> me;
  // Coefficient of the log10(tau1/tau2) term.
  double temp_term_coeff = 1.0;

  double interaction_exponent() const {
    return me ? *me : 1.1 * std::sqrt(s2 / s1);
  }

  void validate(double max_airspeed) const {
    if (!(v1 > v2) || !(v2 >= 0.0)) {
      throw ValidationError("engine_noise: require v1 > v2 >= 0");
    }
    if (!(s1 > 0.0) || !(s2 > 0.0) || !(tau1 > 0.0) || !(tau2 > 0.0) ||
        !(rho1 > 0.0) || !(d > 0.0)) {
      throw ValidationError(
          "engine_noise: s1, s2, tau1, tau2, rho1 and d must be positive");
    }
    if (!(v1 > max_airspeed)) {
      throw ValidationError(
          "engine_noise: v1 must exceed the maximum operating airspeed");
    }
  }
};

/// Receiver on the ground plane (height 0).
struct Observer {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Observer&, const Observer&) = default;
};

enum class DirectivityMode {
  // Angle between the velocity vector (from gamma, chi) and the
  // aircraft-to-observer line.
  velocity_vector,
  // Angle between a fixed horizontal track axis and the aircraft-to-observer
  // line; the level then no longer depends on gamma, chi or mu.
  track_axis,
};

/// Additive level corrections kept as named hooks; all zero by default.
struct PropagationCorrections {
  double atmospheric = 0.0;
  double ground = 0.0;
  double frequency = 0.0;
};

struct NoiseModel {
  EngineNoiseParams engine;
  DirectivityMode directivity = DirectivityMode::velocity_vector;
  // rad, used by DirectivityMode::track_axis; scenarios default it to the
  // initial-to-final ground track.
  std::optional<double> track_heading;
  PropagationCorrections corrections;
};

/// Piecewise trajectory: states at grid nodes, one control per interval.
struct Trajectory {
  std::vector<double> times;
  std::vector<State<>> states;
  std::vector<Control<>> controls;

  int intervals() const { return static_cast<int>(controls.size()); }
  double duration() const { return times.back() - times.front(); }

  /// Control in force at node k (the last interval's control at the end).
  const Control<>& control_at_node(std::size_t k) const {
    return controls[std::min(k, controls.size() - 1)];
  }

  void validate() const {
    if (controls.empty() || states.size() != controls.size() + 1 ||
        times.size() != states.size()) {
      throw ValidationError(
          "trajectory: need N >= 1 controls, N + 1 states and N + 1 times");
    }
    const double step = (times.back() - times.front()) / controls.size();
    if (!(step > 0.0)) {
      throw ValidationError("trajectory: times must increase");
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
      const double dt = times[k] - times[k - 1];
      if (!(dt > 0.0) || std::abs(dt - step) > 1e-9 * std::max(1.0, step)) {
        throw ValidationError("trajectory: times must be equidistant");
      }
    }
  }
};

template <typename T>
T source_observer_distance(const State<T>& s, const Observer& obs) {
  using std::sqrt;
  const T dx = s.x - obs.x;
  const T dy = s.y - obs.y;
  const T r = sqrt(dx * dx + dy * dy + s.h * s.h);
  if (ad::value_of(r) < 1.0) return T(1.0);  // near-field guard
  return r;
}

template <typename T>
T effective_jet_speed(const T& V, const EngineNoiseParams& p) {
  using std::pow;
  if (!(ad::value_of(V) < p.v1)) {
    throw DomainError("effective_jet_speed: airspeed must stay below v1");
  }
  return p.v1 * pow(1.0 - V / p.v1, 2.0 / 3.0);
}

template <typename T>
T density_exponent_w(const T& Ve, const T& c) {
  using std::pow;
  const T r = pow(Ve / c, 3.5);
  return 3.0 * r / (0.6 + r) - 1.0;
}

template <typename T>
T convection_mach(double v1, const T& V, const T& c) {
  return 0.62 * (v1 - V) / c;
}

/// Doppler convection factor expressed through cos(theta).
template <typename T>
T doppler_factor_cos(const T& Mc, const T& cos_theta) {
  const T a = 1.0 + Mc * cos_theta;
  return a * a + 0.04 * Mc * Mc;
}

inline double doppler_factor(double Mc, double theta) {
  return doppler_factor_cos(Mc, std::cos(theta));
}

/// cos of the directivity angle; see DirectivityMode.
template <typename T>
T directivity_cosine(const State<T>& s, const Observer& obs,
                     DirectivityMode mode = DirectivityMode::velocity_vector,
                     double track_heading = 0.0) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T rx = obs.x - s.x;
  const T ry = obs.y - s.y;
  const T rz = -s.h;
  const T norm = sqrt(rx * rx + ry * ry + rz * rz);
  if (!(ad::value_of(norm) > 1e-9)) {
    throw DomainError("directivity: aircraft coincides with the observer");
  }
  if (mode == DirectivityMode::track_axis) {
    return (std::cos(track_heading) * rx + std::sin(track_heading) * ry) / norm;
  }
  const T cg = cos(s.gamma);
  return (cg * cos(s.chi) * rx + cg * sin(s.chi) * ry + sin(s.gamma) * rz) /
         norm;
}

inline double directivity_angle(
    const State<>& s, const Observer& obs,
    DirectivityMode mode = DirectivityMode::velocity_vector,
    double track_heading = 0.0) {
  const double c = directivity_cosine(s, obs, mode, track_heading);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Individual contributions to L_P in dB; total() is their sum.
template <typename T = double>
struct NoiseTerms {
  T source{};           // 141 dB reference
  T density{};          // 10 log10 (rho1/rho)^w
  T velocity{};         // 10 log10 (Ve/c)^7.5
  T nozzle_geometry{};  // 3 log10 (2 s1/(pi d^2) + 0.5)
  T mixing{};           // 10 log10 ((1 - v2/v1)^me + 1.2 (...)^4/(...)^3)
  T nozzle_area{};      // 10 log10 s1
  T temperature{};      // coeff log10 (tau1/tau2)
  T altitude{};         // 10 log10 ((rho/rho_ISA)^2 (c/c_ISA)^4)
  T divergence{};       // -20 log10 R
  T doppler{};          // -15 log10 C_D(Mc, theta)
  T convective{};       // -10 log10 (1 - M cos theta)
  T atmospheric{};      // hooks
  T ground{};
  T frequency{};

  T total() const {
    return source + density + velocity + nozzle_geometry + mixing +
           nozzle_area + temperature + altitude + divergence + doppler +
           convective + atmospheric + ground + frequency;
  }

  static constexpr std::array<const char*, 14> names{
      "source",    "density",     "velocity",    "nozzle_geometry",
      "mixing",    "nozzle_area", "temperature", "altitude",
      "divergence", "doppler",    "convective",  "atmospheric",
      "ground",    "frequency"};

  std::array<T, 14> values() const {
    return {source,      density,     velocity,   nozzle_geometry, mixing,
            nozzle_area, temperature, altitude,   divergence,      doppler,
            convective,  atmospheric, ground,     frequency};
  }
};

namespace detail {
template <typename T>
T checked_log10(const T& arg, const char* term) {
  using std::log10;
  const double v = ad::value_of(arg);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw NoiseTermError(term, "log10 of non-positive argument " +
                                   std::to_string(v));
  }
  return log10(arg);
}
}  // namespace detail

/// Term-by-term jet noise level at the observer. The control does not enter
/// the jet model (fixed nozzle exit conditions) but is kept in the signature
/// for symmetry with the other node functions.
template <typename T>
NoiseTerms<T> jet_noise_terms(const State<T>& s, const Control<T>& /*u*/,
                              const Observer& obs, const NoiseModel& noise,
                              const Atmosphere& atm,
                              const AircraftModel& /*model*/) {
  using std::pow;
  const EngineNoiseParams& p = noise.engine;
  const T rho = air_density(s.h, atm);
  const T c = speed_of_sound(s.h, atm);
  const T Ve = effective_jet_speed(s.V, p);
  const T w = density_exponent_w(Ve, c);
  const T R = source_observer_distance(s, obs);
  const T cos_theta =
      directivity_cosine(s, obs, noise.directivity,
                         noise.track_heading.value_or(0.0));
  const T Mc = convection_mach(p.v1, s.V, c);
  const T M = s.V / c;

  NoiseTerms<T> t;
  t.source = T(141.0);
  t.density = 10.0 * w * detail::checked_log10(T(p.rho1) / rho, "density");
  t.velocity = 75.0 * detail::checked_log10(Ve / c, "velocity");
  t.nozzle_geometry =
      T(3.0 * std::log10(2.0 * p.s1 / (std::numbers::pi * p.d * p.d) + 0.5));
  const double me = p.interaction_exponent();
  const double mixing_arg =
      std::pow(1.0 - p.v2 / p.v1, me) +
      1.2 * std::pow(1.0 + p.s2 * p.v2 * p.v2 / (p.s1 * p.v1 * p.v1), 4) /
          std::pow(1.0 + p.s2 / p.s1, 3);
  t.mixing = T(10.0 * ad::value_of(detail::checked_log10(mixing_arg, "mixing")));
  t.nozzle_area = T(10.0 * std::log10(p.s1));
  t.temperature = T(p.temp_term_coeff * std::log10(p.tau1 / p.tau2));
  const T rho_ratio = rho / atm.sea_level_density;
  const T c_ratio = c / atm.sea_level_sound_speed;
  const T c2 = c_ratio * c_ratio;
  t.altitude = 10.0 * detail::checked_log10(rho_ratio * rho_ratio * c2 * c2,
                                            "altitude");
  t.divergence = -20.0 * detail::checked_log10(R, "divergence");
  t.doppler = -15.0 * detail::checked_log10(doppler_factor_cos(Mc, cos_theta),
                                            "doppler");
  t.convective =
      -10.0 * detail::checked_log10(1.0 - M * cos_theta, "convective");
  t.atmospheric = T(noise.corrections.atmospheric);
  t.ground = T(noise.corrections.ground);
  t.frequency = T(noise.corrections.frequency);
  return t;
}

/// Overall sound pressure level L_P at the observer, dB.
template <typename T>
T jet_source_and_corrections(const State<T>& s, const Control<T>& u,
                             const Observer& obs, const NoiseModel& noise,
                             const Atmosphere& atm,
                             const AircraftModel& model) {
  return jet_noise_terms(s, u, obs, noise, atm, model).total();
}

/// Trapezoid weights on a uniform grid of N intervals with step h.
inline std::vector<double> trapezoid_weights(int intervals, double step) {
  std::vector<double> w(static_cast<std::size_t>(intervals) + 1, step);
  w.front() = w.back() = 0.5 * step;
  return w;
}

/// ln(10)/10: converts a level in dB to the natural log of its energy ratio.
inline constexpr double kDecibel = std::numbers::ln10 / 10.0;

/// 10 log10 of the time average of 10^(L/10), trapezoid in time. Shifted by
/// the largest level so the exponentials stay in range.
template <typename T>
T leq_from_levels(std::span<const double> times, std::span<const T> levels) {
  using std::exp;
  using std::log10;
  if (times.size() != levels.size() || times.size() < 2) {
    throw ValidationError("leq: need matching times/levels, at least two");
  }
  double peak = ad::value_of(levels[0]);
  for (const T& l : levels) peak = std::max(peak, ad::value_of(l));
  T sum(0.0);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    sum += 0.5 * dt *
           (exp(kDecibel * (levels[k] - peak)) +
            exp(kDecibel * (levels[k + 1] - peak)));
  }
  return peak + 10.0 * log10(sum / (times.back() - times.front()));
}

inline std::vector<double> noise_levels(const Trajectory& traj,
                                        const Observer& obs,
                                        const NoiseModel& noise,
                                        const Atmosphere& atm,
                                        const AircraftModel& model) {
  std::vector<double> levels(traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    levels[k] = jet_source_and_corrections(traj.states[k],
                                           traj.control_at_node(k), obs, noise,
                                           atm, model);
  }
  return levels;
}

/// Equivalent continuous level L_eq over [t_0, t_N] at one observer, dB.
inline double leq(const Trajectory& traj, const Observer& obs,
                  const NoiseModel& noise, const Atmosphere& atm,
                  const AircraftModel& model) {
  traj.validate();
  const std::vector<double> levels = noise_levels(traj, obs, noise, atm, model);
  return leq_from_levels<double>(traj.times, levels);
}

/// Fuel burnt over the trajectory, kg. Each interval is integrated by the
/// trapezoid rule with that interval's control held at both ends.
inline double total_consumption(const Trajectory& traj,
                                const AircraftModel& model,
                                const Atmosphere& atm) {
  traj.validate();
  double total = 0.0;
  for (std::size_t k = 0; k < traj.controls.size(); ++k) {
    const double dt = traj.times[k + 1] - traj.times[k];
    total += 0.5 * dt *
             (fuel_flow(traj.states[k], traj.controls[k], model, atm) +
              fuel_flow(traj.states[k + 1], traj.controls[k], model, atm));
  }
  return total;
}

/// Per-node, per-term L_P breakdown as CSV (debugging aid).
inline void write_noise_breakdown_csv(std::ostream& out,
                                      const Trajectory& traj,
                                      const Observer& obs,
                                      const NoiseModel& noise,
                                      const Atmosphere& atm,
                                      const AircraftModel& model) {
  out << "t";
  for (const char* n : NoiseTerms<>::names) out << ',' << n;
  out << ",L_P\n";
  char buf[32];
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const NoiseTerms<> terms = jet_noise_terms(
        traj.states[k], traj.control_at_node(k), obs, noise, atm, model);
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[k]);
    out << buf;
    for (double v : terms.values()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", terms.total());
    out << ',' << buf << '\n';
  }
}

}  // namespace quietpath

#pragma once

// Problem variants built on the transcription: noise-minimal, fuel-minimal
// reference, fuel-capped noise-minimal and multi-observer minimax, together
// with the initial guess and the multi-start driver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "quietpath/flight_dynamics.hpp"
#include "quietpath/nlp_solver.hpp"
#include "quietpath/noise.hpp"
#include "quietpath/scenario.hpp"
#include "quietpath/transcription.hpp"

namespace quietpath {

struct VariantResult {
  Variant variant = Variant::noise;
  Trajectory trajectory;
  SolveReport report;
  Vector x;
  Vector multipliers;
  std::vector<double> leq;  // dB, one per scenario observer
  double consumption = 0.0; // kg
  std::optional<double> theta;
  InterNodeReport internode;
  int start_index = 0;      // which start produced the result

  bool optimal() const { return report.status == SolveStatus::optimal; }
  double worst_leq() const {
    return leq.empty() ? -std::numeric_limits<double>::infinity()
                       : *std::max_element(leq.begin(), leq.end());
  }
};

/// Relative extra consumption of a trajectory over the reference, in percent,
/// under both normalisations in use.
struct FuelComparison {
  double over_trajectory = 0.0;  // (CO - CO_ref) / CO
  double over_reference = 0.0;   // (CO - CO_ref) / CO_ref
};

inline FuelComparison compare_consumption(double co, double co_reference) {
  if (!(co > 0.0) || !(co_reference > 0.0)) {
    throw ValidationError("consumption comparison needs positive values");
  }
  return {100.0 * (co - co_reference) / co,
          100.0 * (co - co_reference) / co_reference};
}

namespace detail {

// Trim alpha and delta_x so that the node follows the prescribed speed rate
// and stays on a constant flight-path angle with wings level.
inline Control<> trim(const State<>& s, double speed_rate,
                      const AircraftModel& ac, const Atmosphere& atm,
                      const PathBounds& pb) {
  const double weight = ac.mass * ac.gravity;
  Control<> u{0.0, pb.delta_x.lower, 0.0};
  for (int it = 0; it < 8; ++it) {
    const double thr = thrust(s.h, s.V, u.delta_x, ac, atm);
    const double q = 0.5 * air_density(s.h, atm) * ac.wing_area * s.V * s.V;
    // (T sin a + q Cla a) = W cos g, linearised in a.
    u.alpha = weight * std::cos(s.gamma) / (thr + q * ac.lift_slope);
    u.alpha = std::clamp(u.alpha, pb.alpha.lower, pb.alpha.upper);
    const double needed = ac.mass * (speed_rate + ac.gravity * std::sin(s.gamma)) +
                          drag(s.h, s.V, u.alpha, ac, atm);
    const double full = thrust(s.h, s.V, 1.0, ac, atm) * std::cos(u.alpha);
    u.delta_x = std::clamp(needed / full, pb.delta_x.lower, pb.delta_x.upper);
  }
  return u;
}

inline void clip(Trajectory& traj, const PathBounds& pb) {
  for (auto& s : traj.states) {
    s.V = std::clamp(s.V, pb.V.lower, pb.V.upper);
    s.gamma = std::clamp(s.gamma, pb.gamma.lower, pb.gamma.upper);
    s.chi = std::clamp(s.chi, pb.chi.lower, pb.chi.upper);
    s.h = std::clamp(s.h, pb.height.lower, pb.height.upper);
  }
  for (auto& u : traj.controls) {
    u.alpha = std::clamp(u.alpha, pb.alpha.lower, pb.alpha.upper);
    u.delta_x = std::clamp(u.delta_x, pb.delta_x.lower, pb.delta_x.upper);
    u.mu = std::clamp(u.mu, pb.mu.lower, pb.mu.upper);
  }
}

}  // namespace detail

/// Straight-line geometric guess: positions interpolated between the boundary
/// points, speed linear from V0 to the speed floor, angles from the path by
/// finite differences, trimmed alpha and delta_x, zero roll. Clipped to the
/// bounds; boundary values are reproduced exactly.
inline Trajectory initial_guess(const Scenario& scn) {
  scn.validate();
  const Grid grid = grid_for(scn);
  const int N = grid.N;
  const BoundaryConditions& b = scn.boundary;
  const double v_end = 1.3 * scn.bounds.stall_speed;
  Trajectory traj;
  traj.times = grid.times();
  traj.states.resize(N + 1);
  traj.controls.resize(N);
  for (int k = 0; k <= N; ++k) {
    const double f = static_cast<double>(k) / N;
    State<>& s = traj.states[k];
    s.x = b.x0 + f * (b.xf - b.x0);
    s.y = b.y0 + f * (b.yf - b.y0);
    s.h = b.h0 + f * (b.hf - b.h0);
    s.V = b.V0 + f * (v_end - b.V0);
  }
  // The path is straight, so every forward difference gives the same angles.
  const double dx = b.xf - b.x0;
  const double dy = b.yf - b.y0;
  const double dh = b.hf - b.h0;
  const double gamma = std::atan2(dh, std::hypot(dx, dy));
  const double chi = std::atan2(dy, dx);
  for (auto& s : traj.states) {
    s.gamma = gamma;
    s.chi = chi;
  }
  detail::clip(traj, scn.bounds);
  const double speed_rate = (v_end - b.V0) / (scn.final_time - scn.initial_time);
  for (int k = 0; k < N; ++k) {
    traj.controls[k] = detail::trim(traj.states[k], speed_rate, scn.aircraft,
                                    scn.atmosphere, scn.bounds);
  }
  detail::clip(traj, scn.bounds);
  traj.states.front().x = b.x0;
  traj.states.front().y = b.y0;
  traj.states.front().h = b.h0;
  traj.states.front().V = b.V0;
  traj.states.back().x = b.xf;
  traj.states.back().y = b.yf;
  traj.states.back().h = b.hf;
  return traj;
}

/// Copy of `base` with interior nodes and all controls multiplied by
/// (1 + perturbation * U(-1, 1)), clipped; boundary values untouched.
inline Trajectory perturbed_guess(const Trajectory& base, const Scenario& scn,
                                  std::uint64_t stream) {
  std::mt19937_64 rng(scn.seed * 0x9E3779B97F4A7C15ULL + stream);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto jitter = [&](double v) { return v * (1.0 + scn.perturbation * unit(rng)); };
  Trajectory t = base;
  for (std::size_t k = 1; k + 1 < t.states.size(); ++k) {
    State<>& s = t.states[k];
    s.V = jitter(s.V);
    s.gamma = jitter(s.gamma);
    s.chi = jitter(s.chi);
    s.h = jitter(s.h);
  }
  for (auto& u : t.controls) {
    u.alpha = jitter(u.alpha);
    u.delta_x = jitter(u.delta_x);
  }
  detail::clip(t, scn.bounds);
  return t;
}

inline std::shared_ptr<TranscribedProblem> build_noise_ocp(const Scenario& scn,
                                                          int observer = 0) {
  TranscriptionOptions o;
  o.objective = ObjectiveKind::noise;
  o.observer = observer;
  return assemble(scn, grid_for(scn), RkScheme::heun(), o);
}

inline std::shared_ptr<TranscribedProblem> build_fuel_ocp(const Scenario& scn) {
  TranscriptionOptions o;
  o.objective = ObjectiveKind::fuel;
  return assemble(scn, grid_for(scn), RkScheme::heun(), o);
}

/// Smallest relative margin of the fuel cap above the reference consumption.
/// Tighter caps leave only the reference itself, known to solver accuracy, as
/// feasible, and the interior-point iteration has no interior to work in.
inline constexpr double kMinFuelCapMargin = 1e-4;

/// Cap on CO(traj) for `factor` times the reference consumption, floored at
/// (1 + kMinFuelCapMargin) * CO(Tr1).
inline double fuel_cap_for(double factor, double reference_consumption) {
  return std::max(factor, 1.0 + kMinFuelCapMargin) * reference_consumption;
}

/// Noise objective with CO(traj) <= fuel_cap_for(factor, CO(Tr1)). An
/// infinite factor gives the unconstrained problem.
inline std::shared_ptr<TranscribedProblem> build_fuel_capped_ocp(
    const Scenario& scn, const VariantResult& reference, int observer = 0) {
  if (!(reference.consumption > 0.0)) {
    throw ValidationError("fuel-capped problem needs a positive reference consumption");
  }
  TranscriptionOptions o;
  o.objective = ObjectiveKind::noise;
  o.observer = observer;
  if (std::isfinite(scn.fuel_cap_factor)) {
    o.fuel_cap = fuel_cap_for(scn.fuel_cap_factor, reference.consumption);
  }
  return assemble(scn, grid_for(scn), RkScheme::heun(), o);
}

inline std::shared_ptr<TranscribedProblem> build_minimax_ocp(const Scenario& scn) {
  if (scn.observers.empty()) {
    throw ValidationError("minimax problem needs at least one observer");
  }
  TranscriptionOptions o;
  o.objective = ObjectiveKind::epigraph;
  return assemble(scn, grid_for(scn), RkScheme::heun(), o);
}

/// Per-observer L_eq of a trajectory under the scenario's models.
inline std::vector<double> observer_levels(const Scenario& scn,
                                           const Trajectory& traj) {
  const NoiseModel noise = scn.resolved_noise();
  std::vector<double> out;
  out.reserve(scn.observers.size());
  for (const Observer& o : scn.observers) {
    out.push_back(leq(traj, o, noise, scn.atmosphere, scn.aircraft));
  }
  return out;
}

/// Fraction of intervals whose throttle lies within `tol` of a bound.
inline double throttle_bound_fraction(const Trajectory& traj,
                                      const PathBounds& pb, double tol = 1e-3) {
  if (traj.controls.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& u : traj.controls) {
    if (u.delta_x - pb.delta_x.lower <= tol || pb.delta_x.upper - u.delta_x <= tol) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(traj.controls.size());
}

namespace detail {

inline bool better(const VariantResult& a, const VariantResult& b) {
  if (a.optimal() != b.optimal()) return a.optimal();
  const bool fa = std::isfinite(a.report.objective);
  const bool fb = std::isfinite(b.report.objective);
  if (fa != fb) return fa;
  return a.report.objective < b.report.objective;
}

}  // namespace detail

/// Solves `problem` from every start and keeps the best result: optimal
/// before non-optimal, then lowest objective; ties keep the earlier start.
inline VariantResult solve_from_starts(const TranscribedProblem& problem,
                                       const std::vector<Trajectory>& starts,
                                       const SolverOptions& options,
                                       Variant variant) {
  if (starts.empty()) throw ValidationError("solve: no starting trajectory");
  const Scenario& scn = problem.scenario();
  const NlpProblem nlp = problem.nlp();
  std::optional<VariantResult> best;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    double theta = 0.0;
    if (problem.layout().epigraph) {
      const auto levels = observer_levels(scn, starts[i]);
      theta = *std::max_element(levels.begin(), levels.end());
    }
    const Vector x0 = problem.pack(starts[i], theta);
    if (options.log) {
      *options.log << "# " << to_string(variant) << " start " << i << " of "
                   << starts.size() << '\n';
    }
    SolveResult sr = solve(nlp, x0, options);
    VariantResult r;
    r.variant = variant;
    r.start_index = static_cast<int>(i);
    r.report = std::move(sr.report);
    r.x = std::move(sr.x);
    r.multipliers = std::move(sr.multipliers);
    r.trajectory = problem.trajectory(r.x);
    try {
      r.leq = observer_levels(scn, r.trajectory);
      r.consumption = total_consumption(r.trajectory, scn.aircraft, scn.atmosphere);
      r.internode = problem.internode_violation(r.x);
    } catch (const std::exception& e) {
      r.report.status = SolveStatus::error;
      r.report.message = std::string("evaluation of the returned point failed: ") + e.what();
      r.report.objective = std::numeric_limits<double>::infinity();
    }
    if (problem.layout().epigraph) r.theta = r.x[problem.layout().epigraph_index()];
    if (options.log) {
      *options.log << "# status=" << to_string(r.report.status)
                   << " objective=" << r.report.objective
                   << " internode_violation=" << r.internode.max_violation
                   << " interval=" << r.internode.interval
                   << " component=" << r.internode.component << '\n';
    }
    if (!best || detail::better(r, *best)) best = std::move(r);
  }
  return *std::move(best);
}

/// Starts: the given warm starts (if any), the deterministic guess, and
/// `scn.starts - 1` seeded perturbations of the guess.
inline std::vector<Trajectory> start_set(const Scenario& scn,
                                         std::vector<Trajectory> warm = {}) {
  const Trajectory guess = initial_guess(scn);
  warm.push_back(guess);
  for (int i = 1; i < scn.starts; ++i) {
    warm.push_back(perturbed_guess(guess, scn, static_cast<std::uint64_t>(i)));
  }
  return warm;
}

/// Fuel-minimal reference trajectory Tr1 and its noise at every observer.
inline VariantResult solve_fuel_reference(const Scenario& scn,
                                          const SolverOptions& options = {}) {
  auto p = build_fuel_ocp(scn);
  return solve_from_starts(*p, start_set(scn), options, Variant::fuel);
}

/// Noise-minimal trajectory for observer `observer`; Tr1 (when given) is
/// used as an extra start.
inline VariantResult solve_noise(const Scenario& scn,
                                 const SolverOptions& options = {},
                                 const VariantResult* reference = nullptr,
                                 int observer = 0) {
  auto p = build_noise_ocp(scn, observer);
  std::vector<Trajectory> warm;
  if (reference) warm.push_back(reference->trajectory);
  return solve_from_starts(*p, start_set(scn, std::move(warm)), options,
                           Variant::noise);
}

inline VariantResult solve_fuel_capped(const Scenario& scn,
                                       const VariantResult& reference,
                                       const SolverOptions& options = {},
                                       const VariantResult* noise_optimum = nullptr,
                                       int observer = 0) {
  auto p = build_fuel_capped_ocp(scn, reference, observer);
  std::vector<Trajectory> warm{reference.trajectory};
  if (noise_optimum) warm.push_back(noise_optimum->trajectory);
  return solve_from_starts(*p, start_set(scn, std::move(warm)), options,
                           Variant::noise_fuel_capped);
}

inline VariantResult solve_minimax(const Scenario& scn,
                                   const SolverOptions& options = {},
                                   const VariantResult* reference = nullptr) {
  auto p = build_minimax_ocp(scn);
  std::vector<Trajectory> warm;
  if (reference) warm.push_back(reference->trajectory);
  return solve_from_starts(*p, start_set(scn, std::move(warm)), options,
                           Variant::minimax);
}

/// Results of one scenario: the reference plus the requested variant.
struct ScenarioOutcome {
  VariantResult reference;
  std::optional<VariantResult> noise;  // unconstrained optimum, when computed
  VariantResult result;                // the requested variant
};

/// Runs the requested variant of `scn` (observer 0 for single-observer
/// objectives). The fuel reference is always solved first. For the capped
/// variant the unconstrained noise optimum is solved too; if the capped
/// solve finds a lower level, the unconstrained problem is re-solved from it.
inline ScenarioOutcome run_scenario(const Scenario& scn,
                                    const SolverOptions& options = {}) {
  ScenarioOutcome out;
  out.reference = solve_fuel_reference(scn, options);
  switch (scn.variant) {
    case Variant::fuel:
      out.result = out.reference;
      break;
    case Variant::noise:
      out.result = solve_noise(scn, options, &out.reference);
      break;
    case Variant::noise_fuel_capped: {
      VariantResult free = solve_noise(scn, options, &out.reference);
      VariantResult capped =
          solve_fuel_capped(scn, out.reference, options, &free);
      if (capped.optimal() && free.optimal() &&
          capped.report.objective < free.report.objective) {
        auto p = build_noise_ocp(scn);
        VariantResult again = solve_from_starts(*p, {capped.trajectory},
                                                options, Variant::noise);
        if (detail::better(again, free)) free = std::move(again);
      }
      out.noise = std::move(free);
      out.result = std::move(capped);
      break;
    }
    case Variant::minimax:
      out.result = solve_minimax(scn, options, &out.reference);
      break;
  }
  return out;
}

}  // namespace quietpath

#pragma once

// Direct transcription of the descent problem: equidistant grid, controls
// constant on each interval, explicit Runge-Kutta (Heun by default) defect
// constraints, boundary equations, path bounds, and the objective variants.
//
// Decision vector layout (all entries scaled, see Scaling):
//   [ z_0 .. z_N (6 each) | u_0 .. u_{N-1} (3 each) | theta (minimax only) ]
// Control u_k acts on [t_k, t_{k+1}); node N reuses u_{N-1}.

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "quietpath/autodiff.hpp"
#include "quietpath/errors.hpp"
#include "quietpath/flight_dynamics.hpp"
#include "quietpath/nlp_solver.hpp"
#include "quietpath/noise.hpp"
#include "quietpath/scenario.hpp"

namespace quietpath {

struct Grid {
  double t0 = 0.0;
  double tf = 600.0;
  int N = 100;

  double step() const { return (tf - t0) / N; }
  double time(int k) const { return k == N ? tf : t0 + k * step(); }
  std::vector<double> times() const {
    std::vector<double> t(static_cast<std::size_t>(N) + 1);
    for (int k = 0; k <= N; ++k) t[k] = time(k);
    return t;
  }
  void validate() const {
    if (N < 2) throw ValidationError("grid: need N >= 2");
    if (!(tf > t0)) throw ValidationError("grid: need tf > t0");
  }
};

/// Explicit Runge-Kutta tableau (strictly lower-triangular a).
struct RkScheme {
  static constexpr int kMaxStages = 4;
  int stages = 2;
  std::array<std::array<double, kMaxStages>, kMaxStages> a{};
  std::array<double, kMaxStages> b{};

  static RkScheme heun() {
    RkScheme s;
    s.stages = 2;
    s.a[1][0] = 1.0;
    s.b[0] = 0.5;
    s.b[1] = 0.5;
    return s;
  }

  static RkScheme explicit_euler() {
    RkScheme s;
    s.stages = 1;
    s.b[0] = 1.0;
    return s;
  }

  void validate() const {
    if (stages < 1 || stages > kMaxStages) {
      throw ValidationError("rk scheme: unsupported stage count");
    }
    double sum = 0.0;
    for (int i = 0; i < stages; ++i) {
      sum += b[i];
      for (int j = i; j < stages; ++j) {
        if (a[i][j] != 0.0) {
          throw ValidationError("rk scheme: tableau must be explicit");
        }
      }
    }
    if (std::abs(sum - 1.0) > 1e-14) {
      throw ValidationError("rk scheme: weights must sum to one");
    }
  }
};

/// One explicit Runge-Kutta step z_{k+1} = z_k + h sum_i b_i f(z_ki, u_k),
/// stages evaluated in order.
template <typename T, typename Rhs>
State<T> rk_step(const State<T>& z, const Control<T>& u, double h,
                 const RkScheme& scheme, Rhs&& rhs) {
  const std::array<T, 6> z0 = z.to_array();
  std::array<std::array<T, 6>, RkScheme::kMaxStages> k;
  for (int i = 0; i < scheme.stages; ++i) {
    std::array<T, 6> stage = z0;
    for (int j = 0; j < i; ++j) {
      const double aij = scheme.a[i][j];
      if (aij == 0.0) continue;
      for (int c = 0; c < 6; ++c) stage[c] += (h * aij) * k[j][c];
    }
    k[i] = rhs(State<T>::from_array(stage), u).to_array();
  }
  std::array<T, 6> out = z0;
  for (int i = 0; i < scheme.stages; ++i) {
    for (int c = 0; c < 6; ++c) out[c] += (h * scheme.b[i]) * k[i][c];
  }
  return State<T>::from_array(out);
}

/// Heun: z + h/2 (f(z, u) + f(z + h f(z, u), u)).
template <typename T, typename Rhs>
State<T> heun_step(const State<T>& z, const Control<T>& u, double h,
                   Rhs&& rhs) {
  return rk_step(z, u, h, RkScheme::heun(), std::forward<Rhs>(rhs));
}

/// Forward simulation of piecewise-constant controls from z0.
inline Trajectory simulate(const State<>& z0,
                           const std::vector<Control<>>& controls,
                           const Grid& grid, const RkScheme& scheme,
                           const AircraftModel& model, const Atmosphere& atm) {
  if (static_cast<int>(controls.size()) != grid.N) {
    throw ValidationError("simulate: need one control per interval");
  }
  Trajectory traj;
  traj.times = grid.times();
  traj.controls = controls;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(z0);
  auto rhs = [&](const State<>& s, const Control<>& c) {
    return dynamics_rhs(s, c, model, atm);
  };
  for (int k = 0; k < grid.N; ++k) {
    traj.states.push_back(
        rk_step(traj.states.back(), controls[k], grid.step(), scheme, rhs));
  }
  return traj;
}

/// Power-of-two scale factors so scaling and unscaling are exact in binary.
struct Scaling {
  static constexpr std::array<double, 6> state{128.0, 1.0, 1.0,
                                               8192.0, 8192.0, 1024.0};
  static constexpr std::array<double, 3> control{1.0, 1.0, 1.0};
};

struct DecisionLayout {
  int N = 0;
  bool epigraph = false;

  Index num_state_entries() const { return 6 * (N + 1); }
  Index size() const {
    return num_state_entries() + 3 * N + (epigraph ? 1 : 0);
  }
  Index state(int k, int i) const { return 6 * k + i; }
  Index control(int k, int j) const { return num_state_entries() + 3 * k + j; }
  Index epigraph_index() const { return num_state_entries() + 3 * N; }
};

inline Vector pack(const DecisionLayout& layout, const Trajectory& traj,
                   double theta = 0.0) {
  if (static_cast<int>(traj.controls.size()) != layout.N ||
      static_cast<int>(traj.states.size()) != layout.N + 1) {
    throw ValidationError("pack: trajectory does not match the layout");
  }
  Vector w(layout.size());
  for (int k = 0; k <= layout.N; ++k) {
    const auto z = traj.states[k].to_array();
    for (int i = 0; i < 6; ++i) w[layout.state(k, i)] = z[i] / Scaling::state[i];
  }
  for (int k = 0; k < layout.N; ++k) {
    const auto u = traj.controls[k].to_array();
    for (int j = 0; j < 3; ++j) {
      w[layout.control(k, j)] = u[j] / Scaling::control[j];
    }
  }
  if (layout.epigraph) w[layout.epigraph_index()] = theta;
  return w;
}

inline Trajectory unpack(const DecisionLayout& layout, const Vector& w,
                         const Grid& grid) {
  if (w.size() != layout.size()) {
    throw ValidationError("unpack: decision vector has the wrong size");
  }
  Trajectory traj;
  traj.times = grid.times();
  traj.states.resize(layout.N + 1);
  traj.controls.resize(layout.N);
  for (int k = 0; k <= layout.N; ++k) {
    std::array<double, 6> z;
    for (int i = 0; i < 6; ++i) z[i] = w[layout.state(k, i)] * Scaling::state[i];
    traj.states[k] = State<>::from_array(z);
  }
  for (int k = 0; k < layout.N; ++k) {
    std::array<double, 3> u;
    for (int j = 0; j < 3; ++j) {
      u[j] = w[layout.control(k, j)] * Scaling::control[j];
    }
    traj.controls[k] = Control<>::from_array(u);
  }
  return traj;
}

enum class ObjectiveKind { noise, fuel, epigraph };

struct TranscriptionOptions {
  ObjectiveKind objective = ObjectiveKind::noise;
  int observer = 0;                 // noise objective
  std::optional<double> fuel_cap;   // kg; adds CO(w) <= fuel_cap
};

/// One bound row of the path constraint a <= C(z_k, u_k) <= b.
struct PathRow {
  int node = 0;
  const char* component = "";
  Index variable = 0;
  double lower = 0.0;  // scaled
  double upper = 0.0;
};

struct InterNodeReport {
  double max_violation = 0.0;
  int interval = -1;
  std::string component;
};

class TranscribedProblem
    : public std::enable_shared_from_this<TranscribedProblem> {
 public:
  static constexpr int kBoundaryRows = 7;

  TranscribedProblem(Scenario scenario, Grid grid, RkScheme scheme,
                     TranscriptionOptions options)
      : scn_(std::move(scenario)),
        noise_(scn_.resolved_noise()),
        grid_(grid),
        scheme_(scheme),
        options_(options) {
    scn_.validate();
    grid_.validate();
    scheme_.validate();
    layout_.N = grid_.N;
    layout_.epigraph = options_.objective == ObjectiveKind::epigraph;
    if ((options_.objective == ObjectiveKind::noise &&
         (options_.observer < 0 ||
          options_.observer >= static_cast<int>(scn_.observers.size()))) ||
        (options_.objective == ObjectiveKind::epigraph && scn_.observers.empty())) {
      throw ValidationError("transcription: observer index out of range");
    }
    if (options_.fuel_cap && !(*options_.fuel_cap > 0.0)) {
      throw ValidationError("transcription: fuel cap must be positive");
    }
    weights_ = trapezoid_weights(grid_.N, grid_.step());
    times_ = grid_.times();
    build_bounds();
    build_pattern();
  }

  const Scenario& scenario() const { return scn_; }
  const NoiseModel& noise_model() const { return noise_; }
  const Grid& grid() const { return grid_; }
  const RkScheme& scheme() const { return scheme_; }
  const DecisionLayout& layout() const { return layout_; }
  const TranscriptionOptions& options() const { return options_; }

  Index num_variables() const { return layout_.size(); }
  Index num_defects() const { return 6 * static_cast<Index>(grid_.N); }
  Index num_equalities() const { return num_defects() + kBoundaryRows; }
  Index num_inequalities() const {
    Index m = options_.fuel_cap ? 1 : 0;
    if (layout_.epigraph) m += static_cast<Index>(scn_.observers.size());
    return m;
  }
  Index num_constraints() const { return num_equalities() + num_inequalities(); }
  Index fuel_cap_row() const { return num_equalities(); }
  Index epigraph_row(int j) const {
    return num_equalities() + (options_.fuel_cap ? 1 : 0) + j;
  }

  /// Path constraints realised as bounds on the decision variables.
  const std::vector<PathRow>& path_rows() const { return path_rows_; }
  const Vector& lower_bounds() const { return lower_; }
  const Vector& upper_bounds() const { return upper_; }

  Trajectory trajectory(const Vector& w) const { return unpack(layout_, w, grid_); }
  Vector pack(const Trajectory& traj, double theta = 0.0) const {
    return quietpath::pack(layout_, traj, theta);
  }

  // ---- scalar pieces ------------------------------------------------------

  /// L_eq (dB) at observer j.
  double noise_level(const Vector& w, int j) const {
    std::vector<double> levels(grid_.N + 1);
    for (int k = 0; k <= grid_.N; ++k) {
      levels[k] = guarded(k, [&] {
        return level_scaled<double>(node_state<double>(w, k), scn_.observers[j]);
      });
    }
    return leq_from_levels<double>(times_, levels);
  }

  /// Total fuel burnt, kg.
  double consumption(const Vector& w) const {
    double total = 0.0;
    const double half = 0.5 * grid_.step();
    for (int k = 0; k < grid_.N; ++k) {
      total += guarded(k, [&] {
        return half * (fuel_scaled<double>(node_input<double>(w, k, k)) +
                       fuel_scaled<double>(node_input<double>(w, k + 1, k)));
      });
    }
    return total;
  }

  double objective(const Vector& w) const {
    switch (options_.objective) {
      case ObjectiveKind::noise: return noise_level(w, options_.observer);
      case ObjectiveKind::fuel: return consumption(w);
      case ObjectiveKind::epigraph: return w[layout_.epigraph_index()];
    }
    return 0.0;
  }

  void gradient(const Vector& w, Vector& g) const {
    g.setZero(num_variables());
    switch (options_.objective) {
      case ObjectiveKind::noise: {
        const LeqDerivatives d = leq_derivatives(w, options_.observer, false);
        add_state_gradient(g, d, 1.0);
        break;
      }
      case ObjectiveKind::fuel:
        add_fuel_gradient(w, g, 1.0);
        break;
      case ObjectiveKind::epigraph:
        g[layout_.epigraph_index()] = 1.0;
        break;
    }
  }

  void constraints(const Vector& w, Vector& c) const {
    c.resize(num_constraints());
    for (int k = 0; k < grid_.N; ++k) {
      const std::array<double, 6> next =
          guarded(k, [&] { return step_scaled<double>(node_input<double>(w, k, k)); });
      for (int i = 0; i < 6; ++i) {
        c[6 * k + i] = w[layout_.state(k + 1, i)] - next[i];
      }
    }
    const auto bc = boundary_targets();
    for (int r = 0; r < kBoundaryRows; ++r) {
      c[num_defects() + r] = w[bc[r].first] - bc[r].second;
    }
    if (options_.fuel_cap) c[fuel_cap_row()] = consumption(w) / *options_.fuel_cap;
    if (layout_.epigraph) {
      const double theta = w[layout_.epigraph_index()];
      for (int j = 0; j < static_cast<int>(scn_.observers.size()); ++j) {
        c[epigraph_row(j)] = theta - noise_level(w, j);
      }
    }
  }

  const std::vector<std::pair<Index, Index>>& jacobian_pattern() const {
    return pattern_;
  }

  void jacobian(const Vector& w, SparseMatrix& J) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(pattern_.size() + 16);
    for (int k = 0; k < grid_.N; ++k) {
      const auto [value, jac] = guarded(k, [&] {
        return ad::jacobian<6, 9>(
            [&](const auto& in) { return step_scaled(in); }, node_vector(w, k, k));
      });
      (void)value;
      const auto cols = node_columns(k, k);
      for (int i = 0; i < 6; ++i) {
        const Index row = 6 * k + i;
        trip.emplace_back(row, layout_.state(k + 1, i), 1.0);
        for (int c = 0; c < 9; ++c) trip.emplace_back(row, cols[c], -jac(i, c));
      }
    }
    const auto bc = boundary_targets();
    for (int r = 0; r < kBoundaryRows; ++r) {
      trip.emplace_back(num_defects() + r, bc[r].first, 1.0);
    }
    if (options_.fuel_cap) {
      Vector g = Vector::Zero(num_variables());
      add_fuel_gradient(w, g, 1.0 / *options_.fuel_cap);
      for (Index c = 0; c < layout_.epigraph_index(); ++c) {
        if (c >= layout_.num_state_entries() || is_fuel_state(c)) {
          trip.emplace_back(fuel_cap_row(), c, g[c]);
        }
      }
    }
    if (layout_.epigraph) {
      for (int j = 0; j < static_cast<int>(scn_.observers.size()); ++j) {
        const LeqDerivatives d = leq_derivatives(w, j, false);
        const Index row = epigraph_row(j);
        for (int k = 0; k <= grid_.N; ++k) {
          for (int i = 0; i < 6; ++i) {
            trip.emplace_back(row, layout_.state(k, i), -d.p[k] * d.node_grad[k][i]);
          }
        }
        trip.emplace_back(row, layout_.epigraph_index(), 1.0);
      }
    }
    J.resize(num_constraints(), num_variables());
    J.setFromTriplets(trip.begin(), trip.end());
  }

  /// H = sigma Hess f + sum_i lambda_i Hess c_i, dense.
  void hessian(const Vector& w, double sigma, const Vector& lambda,
               Matrix& H) const {
    hessian_split(w, sigma, lambda, H, nullptr);
  }

  /// Same Hessian as base + sum_t weight_t d_t d_t^T. The rank-one parts of
  /// the noise levels go to `terms` when given, leaving H block-sparse.
  void hessian_split(const Vector& w, double sigma, const Vector& lambda,
                     Matrix& H, std::vector<LowRankTerm>* terms) const {
    const Index n = num_variables();
    H.setZero(n, n);
    for (int k = 0; k < grid_.N; ++k) {
      Eigen::Matrix<double, 6, 1> lam = lambda.segment<6>(6 * k);
      if (lam.isZero(0.0)) continue;
      const auto so = guarded(k, [&] {
        return ad::hessian<9>(
            [&](const auto& in) {
              const auto out = step_scaled(in);
              auto s = out[0] * lam[0];
              for (int i = 1; i < 6; ++i) s += out[i] * lam[i];
              return s;
            },
            node_vector(w, k, k));
      });
      add_block(H, node_columns(k, k), -so.hessian);
    }
    if (sigma != 0.0) {
      switch (options_.objective) {
        case ObjectiveKind::noise:
          add_leq_hessian(H, leq_derivatives(w, options_.observer, true), sigma, terms);
          break;
        case ObjectiveKind::fuel:
          add_fuel_hessian(w, H, sigma);
          break;
        case ObjectiveKind::epigraph:
          break;
      }
    }
    if (options_.fuel_cap) {
      const double l = lambda[fuel_cap_row()];
      if (l != 0.0) add_fuel_hessian(w, H, l / *options_.fuel_cap);
    }
    if (layout_.epigraph) {
      for (int j = 0; j < static_cast<int>(scn_.observers.size()); ++j) {
        const double l = lambda[epigraph_row(j)];
        if (l != 0.0) add_leq_hessian(H, leq_derivatives(w, j, true), -l, terms);
      }
    }
  }

  /// Callback view for the solver. Keeps this object alive.
  NlpProblem nlp() const {
    auto self = shared_from_this();
    NlpProblem p;
    p.num_variables = num_variables();
    p.num_equalities = num_equalities();
    p.num_inequalities = num_inequalities();
    p.variable_lower = lower_;
    p.variable_upper = upper_;
    p.inequality_lower.resize(num_inequalities());
    p.inequality_upper.resize(num_inequalities());
    Index r = 0;
    if (options_.fuel_cap) {
      p.inequality_lower[r] = -kInfinity;
      p.inequality_upper[r] = 1.0;
      ++r;
    }
    if (layout_.epigraph) {
      for (std::size_t j = 0; j < scn_.observers.size(); ++j, ++r) {
        p.inequality_lower[r] = 0.0;
        p.inequality_upper[r] = kInfinity;
      }
    }
    p.objective = [self](const Vector& w) { return self->objective(w); };
    p.gradient = [self](const Vector& w, Vector& g) { self->gradient(w, g); };
    p.constraints = [self](const Vector& w, Vector& c) { self->constraints(w, c); };
    p.jacobian = [self](const Vector& w, SparseMatrix& J) { self->jacobian(w, J); };
    p.hessian = [self](const Vector& w, double s, const Vector& l, Matrix& H) {
      self->hessian(w, s, l, H);
    };
    p.hessian_split = [self](const Vector& w, double s, const Vector& l, Matrix& H,
                             std::vector<LowRankTerm>& terms) {
      self->hessian_split(w, s, l, H, &terms);
    };
    p.jacobian_pattern = pattern_;
    p.reentrant = true;
    return p;
  }

  /// Largest path-bound violation on a grid refined `refine` times inside
  /// every interval (states integrated with sub-steps under u_k).
  InterNodeReport internode_violation(const Vector& w, int refine = 10) const {
    const Trajectory traj = trajectory(w);
    InterNodeReport rep;
    const double h = grid_.step() / refine;
    auto rhs = [&](const State<>& s, const Control<>& c) {
      return dynamics_rhs(s, c, scn_.aircraft, scn_.atmosphere);
    };
    auto check = [&](const State<>& s, int k) {
      const std::pair<const char*, double> v[] = {
          {"gamma", scn_.bounds.gamma.violation(s.gamma)},
          {"V", scn_.bounds.V.violation(s.V)},
          {"chi", scn_.bounds.chi.violation(s.chi)}};
      for (const auto& [name, amount] : v) {
        if (amount > rep.max_violation) {
          rep.max_violation = amount;
          rep.interval = k;
          rep.component = name;
        }
      }
    };
    for (int k = 0; k < grid_.N; ++k) {
      State<> s = traj.states[k];
      check(s, k);
      for (int j = 1; j < refine; ++j) {
        s = rk_step(s, traj.controls[k], h, scheme_, rhs);
        check(s, k);
      }
    }
    check(traj.states.back(), grid_.N - 1);
    return rep;
  }

  /// Largest violation of the path bounds at the grid nodes (physical units).
  double node_bound_violation(const Vector& w) const {
    double v = 0.0;
    for (Index i = 0; i < num_variables(); ++i) {
      const double s = i < layout_.num_state_entries()
                           ? Scaling::state[i % 6]
                           : (i < layout_.epigraph_index()
                                  ? Scaling::control[(i - layout_.num_state_entries()) % 3]
                                  : 1.0);
      v = std::max({v, (lower_[i] - w[i]) * s, (w[i] - upper_[i]) * s});
    }
    return v;
  }

 private:
  struct LeqDerivatives {
    double value = 0.0;
    std::vector<double> p;  // normalised energy weights, sum to one
    std::vector<Eigen::Matrix<double, 6, 1>> node_grad;
    std::vector<Eigen::Matrix<double, 6, 6>> node_hess;
  };

  template <typename F>
  static auto guarded(int node, F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const NodeEvaluationError&) {
      throw;
    } catch (const std::exception& e) {
      throw NodeEvaluationError(node, e.what());
    }
  }

  template <typename T>
  static State<T> unscale_state(const T* zs) {
    return {zs[0] * Scaling::state[0], zs[1] * Scaling::state[1],
            zs[2] * Scaling::state[2], zs[3] * Scaling::state[3],
            zs[4] * Scaling::state[4], zs[5] * Scaling::state[5]};
  }

  template <typename T>
  std::array<T, 6> node_state(const Vector& w, int k) const {
    std::array<T, 6> z;
    for (int i = 0; i < 6; ++i) z[i] = T(w[layout_.state(k, i)]);
    return z;
  }

  // (z_node, u_interval) as a 9-vector.
  template <typename T>
  std::array<T, 9> node_input(const Vector& w, int node, int interval) const {
    std::array<T, 9> in;
    for (int i = 0; i < 6; ++i) in[i] = T(w[layout_.state(node, i)]);
    for (int j = 0; j < 3; ++j) in[6 + j] = T(w[layout_.control(interval, j)]);
    return in;
  }

  Eigen::Matrix<double, 9, 1> node_vector(const Vector& w, int node,
                                          int interval) const {
    Eigen::Matrix<double, 9, 1> v;
    const auto in = node_input<double>(w, node, interval);
    for (int i = 0; i < 9; ++i) v[i] = in[i];
    return v;
  }

  std::array<Index, 9> node_columns(int node, int interval) const {
    std::array<Index, 9> cols;
    for (int i = 0; i < 6; ++i) cols[i] = layout_.state(node, i);
    for (int j = 0; j < 3; ++j) cols[6 + j] = layout_.control(interval, j);
    return cols;
  }

  template <typename T>
  std::array<T, 6> step_scaled(const std::array<T, 9>& in) const {
    const State<T> z = unscale_state(in.data());
    const Control<T> u{in[6] * Scaling::control[0], in[7] * Scaling::control[1],
                       in[8] * Scaling::control[2]};
    auto rhs = [&](const State<T>& s, const Control<T>& c) {
      return dynamics_rhs(s, c, scn_.aircraft, scn_.atmosphere);
    };
    const auto next = rk_step(z, u, grid_.step(), scheme_, rhs).to_array();
    std::array<T, 6> out;
    for (int i = 0; i < 6; ++i) out[i] = next[i] / Scaling::state[i];
    return out;
  }

  template <typename T>
  T level_scaled(const std::array<T, 6>& zs, const Observer& obs) const {
    return jet_source_and_corrections(unscale_state(zs.data()), Control<T>{},
                                      obs, noise_, scn_.atmosphere,
                                      scn_.aircraft);
  }

  template <typename T>
  T fuel_scaled(const std::array<T, 9>& in) const {
    const State<T> z = unscale_state(in.data());
    const Control<T> u{in[6] * Scaling::control[0], in[7] * Scaling::control[1],
                       in[8] * Scaling::control[2]};
    return fuel_flow(z, u, scn_.aircraft, scn_.atmosphere);
  }

  LeqDerivatives leq_derivatives(const Vector& w, int j, bool second) const {
    const int n_nodes = grid_.N + 1;
    LeqDerivatives d;
    d.p.resize(n_nodes);
    d.node_grad.resize(n_nodes);
    if (second) d.node_hess.resize(n_nodes);
    std::vector<double> levels(n_nodes);
    const Observer& obs = scn_.observers[j];
    for (int k = 0; k < n_nodes; ++k) {
      Eigen::Matrix<double, 6, 1> z;
      for (int i = 0; i < 6; ++i) z[i] = w[layout_.state(k, i)];
      auto f = [&](const auto& in) { return level_scaled(in, obs); };
      guarded(k, [&] {
        if (second) {
          const auto so = ad::hessian<6>(f, z);
          levels[k] = so.value;
          d.node_grad[k] = so.gradient;
          d.node_hess[k] = so.hessian;
        } else {
          const auto [v, g] = ad::gradient<6>(f, z);
          levels[k] = v;
          d.node_grad[k] = g;
        }
        return 0;
      });
    }
    const double peak = *std::max_element(levels.begin(), levels.end());
    double sum = 0.0;
    for (int k = 0; k < n_nodes; ++k) {
      d.p[k] = weights_[k] * std::exp(kDecibel * (levels[k] - peak));
      sum += d.p[k];
    }
    for (double& pk : d.p) pk /= sum;
    d.value = peak + 10.0 * std::log10(sum / (grid_.tf - grid_.t0));
    return d;
  }

  void add_state_gradient(Vector& g, const LeqDerivatives& d,
                          double weight) const {
    for (int k = 0; k <= grid_.N; ++k) {
      for (int i = 0; i < 6; ++i) {
        g[layout_.state(k, i)] += weight * d.p[k] * d.node_grad[k][i];
      }
    }
  }

  // Hess L_eq = sum_k p_k (Hess L_k + b grad L_k grad L_k^T) - b gbar gbar^T,
  // b = ln(10)/10, gbar = grad L_eq.
  void add_leq_hessian(Matrix& H, const LeqDerivatives& d, double weight,
                       std::vector<LowRankTerm>* terms) const {
    const Index ns = layout_.num_state_entries();
    Vector gbar = Vector::Zero(ns);
    for (int k = 0; k <= grid_.N; ++k) {
      const Eigen::Matrix<double, 6, 6> block =
          d.p[k] * (d.node_hess[k] +
                    kDecibel * d.node_grad[k] * d.node_grad[k].transpose());
      H.block<6, 6>(6 * k, 6 * k) += weight * block;
      gbar.segment<6>(6 * k) = d.p[k] * d.node_grad[k];
    }
    if (terms) {
      terms->push_back({-weight * kDecibel, std::move(gbar)});
    } else {
      H.topLeftCorner(ns, ns).noalias() -= (weight * kDecibel) * gbar * gbar.transpose();
    }
  }

  void add_fuel_gradient(const Vector& w, Vector& g, double weight) const {
    const double half = 0.5 * grid_.step() * weight;
    for (int k = 0; k < grid_.N; ++k) {
      for (int node : {k, k + 1}) {
        const auto [v, grad] = guarded(k, [&] {
          return ad::gradient<9>([&](const auto& in) { return fuel_scaled(in); },
                                 node_vector(w, node, k));
        });
        (void)v;
        const auto cols = node_columns(node, k);
        for (int c = 0; c < 9; ++c) g[cols[c]] += half * grad[c];
      }
    }
  }

  void add_fuel_hessian(const Vector& w, Matrix& H, double weight) const {
    const double half = 0.5 * grid_.step() * weight;
    for (int k = 0; k < grid_.N; ++k) {
      for (int node : {k, k + 1}) {
        const auto so = guarded(k, [&] {
          return ad::hessian<9>([&](const auto& in) { return fuel_scaled(in); },
                                node_vector(w, node, k));
        });
        add_block(H, node_columns(node, k), half * so.hessian);
      }
    }
  }

  template <typename Block>
  static void add_block(Matrix& H, const std::array<Index, 9>& cols,
                        const Block& block) {
    for (int a = 0; a < 9; ++a) {
      for (int b = 0; b < 9; ++b) H(cols[a], cols[b]) += block(a, b);
    }
  }

  // Fuel flow depends on V and h among the states.
  bool is_fuel_state(Index c) const {
    const Index i = c % 6;
    return i == 0 || i == 5;
  }

  std::array<std::pair<Index, double>, kBoundaryRows> boundary_targets() const {
    const BoundaryConditions& b = scn_.boundary;
    const int N = grid_.N;
    return {{{layout_.state(0, 3), b.x0 / Scaling::state[3]},
             {layout_.state(0, 4), b.y0 / Scaling::state[4]},
             {layout_.state(0, 5), b.h0 / Scaling::state[5]},
             {layout_.state(0, 0), b.V0 / Scaling::state[0]},
             {layout_.state(N, 3), b.xf / Scaling::state[3]},
             {layout_.state(N, 4), b.yf / Scaling::state[4]},
             {layout_.state(N, 5), b.hf / Scaling::state[5]}}};
  }

  void build_bounds() {
    const Index n = num_variables();
    lower_ = Vector::Constant(n, -kInfinity);
    upper_ = Vector::Constant(n, kInfinity);
    const PathBounds& pb = scn_.bounds;
    auto set = [&](Index idx, const Interval& iv, double scale) {
      lower_[idx] = iv.lower / scale;
      upper_[idx] = iv.upper / scale;
    };
    for (int k = 0; k <= grid_.N; ++k) {
      set(layout_.state(k, 0), pb.V, Scaling::state[0]);
      set(layout_.state(k, 1), pb.gamma, Scaling::state[1]);
      set(layout_.state(k, 2), pb.chi, Scaling::state[2]);
      set(layout_.state(k, 5), pb.height, Scaling::state[5]);
    }
    for (int k = 0; k < grid_.N; ++k) {
      set(layout_.control(k, 0), pb.alpha, Scaling::control[0]);
      set(layout_.control(k, 1), pb.delta_x, Scaling::control[1]);
      set(layout_.control(k, 2), pb.mu, Scaling::control[2]);
    }
    // C(z_k, u_k) = (gamma, V, chi, alpha, delta_x, mu) for k = 0..N.
    path_rows_.clear();
    for (int k = 0; k <= grid_.N; ++k) {
      const int uk = std::min(k, grid_.N - 1);
      const std::pair<const char*, Index> comps[] = {
          {"gamma", layout_.state(k, 1)},   {"V", layout_.state(k, 0)},
          {"chi", layout_.state(k, 2)},     {"alpha", layout_.control(uk, 0)},
          {"delta_x", layout_.control(uk, 1)}, {"mu", layout_.control(uk, 2)}};
      for (const auto& [name, idx] : comps) {
        path_rows_.push_back({k, name, idx, lower_[idx], upper_[idx]});
      }
    }
  }

  void build_pattern() {
    pattern_.clear();
    for (int k = 0; k < grid_.N; ++k) {
      const auto cols = node_columns(k, k);
      for (int i = 0; i < 6; ++i) {
        const Index row = 6 * k + i;
        pattern_.emplace_back(row, layout_.state(k + 1, i));
        for (Index c : cols) pattern_.emplace_back(row, c);
      }
    }
    const auto bc = boundary_targets();
    for (int r = 0; r < kBoundaryRows; ++r) {
      pattern_.emplace_back(num_defects() + r, bc[r].first);
    }
    if (options_.fuel_cap) {
      for (Index c = 0; c < layout_.epigraph_index(); ++c) {
        if (c >= layout_.num_state_entries() || is_fuel_state(c)) {
          pattern_.emplace_back(fuel_cap_row(), c);
        }
      }
    }
    if (layout_.epigraph) {
      for (int j = 0; j < static_cast<int>(scn_.observers.size()); ++j) {
        for (Index c = 0; c < layout_.num_state_entries(); ++c) {
          pattern_.emplace_back(epigraph_row(j), c);
        }
        pattern_.emplace_back(epigraph_row(j), layout_.epigraph_index());
      }
    }
  }

  Scenario scn_;
  NoiseModel noise_;
  Grid grid_;
  RkScheme scheme_;
  TranscriptionOptions options_;
  DecisionLayout layout_;
  std::vector<double> weights_;
  std::vector<double> times_;
  Vector lower_;
  Vector upper_;
  std::vector<PathRow> path_rows_;
  std::vector<std::pair<Index, Index>> pattern_;
};

/// Transcribe a scenario into an NLP (objective per `options`).
inline std::shared_ptr<TranscribedProblem> assemble(
    const Scenario& scenario, const Grid& grid,
    const RkScheme& scheme = RkScheme::heun(),
    TranscriptionOptions options = {}) {
  return std::make_shared<TranscribedProblem>(scenario, grid, scheme, options);
}

inline Grid grid_for(const Scenario& s) {
  return Grid{s.initial_time, s.final_time, s.intervals};
}

}  // namespace quietpath

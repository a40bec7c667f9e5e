#pragma once

// Run orchestration and export: single solves, observer sweeps, noise/fuel
// comparisons and forward evaluation of a given control history. Every run
// writes trajectory CSVs (17 significant digits), an iteration log and a JSON
// report whose manifest carries the SHA-256 of each artifact. Files are
// written to a temporary name and renamed into place.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "quietpath/config.hpp"
#include "quietpath/scenarios.hpp"

namespace quietpath {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---- bytes and files --------------------------------------------------------

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

/// 17 significant digits: reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ManifestEntry {
  std::string file;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Collects artifacts of one run directory and checks them after writing.
class ArtifactSet {
 public:
  explicit ArtifactSet(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  void write(const std::string& relative, const std::string& bytes) {
    const fs::path path = root_ / relative;
    write_file_atomic(path, bytes);
    ManifestEntry e{relative, sha256_hex(bytes), bytes.size()};
    if (sha256_hex(read_file(path)) != e.sha256) {
      throw std::runtime_error("hash mismatch after writing '" + path.string() + "'");
    }
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(e));
  }

  std::vector<ManifestEntry> entries() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<ManifestEntry> out = entries_;
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.file < b.file; });
    return out;
  }

 private:
  fs::path root_;
  mutable std::mutex mutex_;
  std::vector<ManifestEntry> entries_;
};

/// True when every listed file exists under `root` with the listed hash.
inline bool verify_manifest(const fs::path& root, const std::vector<ManifestEntry>& m,
                            std::string* problem = nullptr) {
  for (const ManifestEntry& e : m) {
    const fs::path p = root / e.file;
    if (!fs::exists(p)) {
      if (problem) *problem = e.file + ": missing";
      return false;
    }
    if (sha256_hex(read_file(p)) != e.sha256) {
      if (problem) *problem = e.file + ": hash mismatch";
      return false;
    }
  }
  return true;
}

// ---- trajectory CSV ---------------------------------------------------------

/// One row per node: time, state, the control in force (the last interval's
/// control at the final node) and L_P at every observer.
inline std::string trajectory_csv(const Trajectory& traj, const Scenario& scn) {
  traj.validate();
  const NoiseModel noise = scn.resolved_noise();
  std::vector<std::vector<double>> levels;
  for (const Observer& o : scn.observers) {
    levels.push_back(noise_levels(traj, o, noise, scn.atmosphere, scn.aircraft));
  }
  std::string out = "t,V,gamma,chi,x,y,h,alpha,delta_x,mu";
  for (std::size_t j = 0; j < scn.observers.size(); ++j) {
    out += ",L_P_obs" + std::to_string(j);
  }
  out += '\n';
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const State<>& s = traj.states[k];
    const Control<>& u = traj.control_at_node(k);
    const double row[] = {traj.times[k], s.V, s.gamma, s.chi, s.x, s.y, s.h,
                          u.alpha, u.delta_x, u.mu};
    for (std::size_t c = 0; c < std::size(row); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    for (const auto& l : levels) out += ',' + format_double(l[k]);
    out += '\n';
  }
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline CsvTable read_csv(std::istream& in, const std::string& what = "csv") {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw ValidationError(what + ": empty file");
  t.header = split(line);
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw ValidationError(what + ": line " + std::to_string(number) +
                            " has " + std::to_string(cells.size()) + " fields, expected " +
                            std::to_string(t.header.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != c.size()) {
        throw ValidationError(what + ": line " + std::to_string(number) +
                              ": not a number '" + c + "'");
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Inverse of trajectory_csv (the L_P columns are ignored).
inline Trajectory read_trajectory_csv(std::istream& in) {
  const CsvTable t = read_csv(in, "trajectory");
  const char* names[] = {"t", "V", "gamma", "chi", "x", "y", "h", "alpha", "delta_x", "mu"};
  std::size_t col[10];
  for (int i = 0; i < 10; ++i) {
    const auto c = t.column(names[i]);
    if (!c) throw ValidationError(std::string("trajectory: missing column ") + names[i]);
    col[i] = *c;
  }
  if (t.rows.size() < 2) throw ValidationError("trajectory: need at least two rows");
  Trajectory traj;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& r = t.rows[k];
    traj.times.push_back(r[col[0]]);
    traj.states.push_back({r[col[1]], r[col[2]], r[col[3]], r[col[4]], r[col[5]], r[col[6]]});
    if (k + 1 < t.rows.size()) traj.controls.push_back({r[col[7]], r[col[8]], r[col[9]]});
  }
  traj.validate();
  return traj;
}

/// Control history read from a CSV with columns alpha, delta_x and mu, plus
/// the initial gamma and chi when the file carries those columns.
struct ControlFile {
  std::vector<Control<>> controls;
  std::optional<double> gamma0;
  std::optional<double> chi0;
};

/// Expects `intervals` rows; a trailing extra row (a trajectory file) is
/// ignored.
inline ControlFile read_control_file(std::istream& in, int intervals) {
  const CsvTable t = read_csv(in, "controls");
  const auto a = t.column("alpha");
  const auto d = t.column("delta_x");
  const auto m = t.column("mu");
  if (!a || !d || !m) throw ValidationError("controls: need columns alpha, delta_x, mu");
  const std::size_t n = static_cast<std::size_t>(intervals);
  if (t.rows.size() != n && t.rows.size() != n + 1) {
    throw ValidationError("controls: expected " + std::to_string(n) + " rows (or " +
                          std::to_string(n + 1) + " with a final node), got " +
                          std::to_string(t.rows.size()));
  }
  ControlFile out;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = t.rows[k];
    out.controls.push_back({r[*a], r[*d], r[*m]});
  }
  if (const auto g = t.column("gamma")) out.gamma0 = t.rows.front()[*g];
  if (const auto c = t.column("chi")) out.chi0 = t.rows.front()[*c];
  return out;
}

// ---- observer sets ----------------------------------------------------------

/// Twelve receivers on a 4 x 3 grid: x in {0, 20, 40, 60} km, y in {0, 2.5, 5} km.
inline std::vector<Observer> grid12_observers() {
  std::vector<Observer> out;
  for (double x : {0.0, 20000.0, 40000.0, 60000.0}) {
    for (double y : {0.0, 2500.0, 5000.0}) out.push_back({x, y});
  }
  return out;
}

/// Five receivers spread along the approach for the minimax case.
inline std::vector<Observer> minimax5_observers() {
  return {{0.0, 0.0}, {20000.0, 2500.0}, {40000.0, 5000.0}, {60000.0, 0.0},
          {60000.0, 5000.0}};
}

/// "grid12", "minimax5" or a comma-separated list of x:y pairs.
inline std::vector<Observer> parse_observer_list(const std::string& spec) {
  if (spec == "grid12") return grid12_observers();
  if (spec == "minimax5") return minimax5_observers();
  std::vector<Observer> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ValidationError("observers: expected x:y, got '" + item + "'");
    }
    try {
      std::size_t ux = 0;
      std::size_t uy = 0;
      const std::string xs = item.substr(0, colon);
      const std::string ys = item.substr(colon + 1);
      const double x = std::stod(xs, &ux);
      const double y = std::stod(ys, &uy);
      if (ux != xs.size() || uy != ys.size()) throw std::invalid_argument(item);
      out.push_back({x, y});
    } catch (const std::exception&) {
      throw ValidationError("observers: expected x:y, got '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError("observers: empty list");
  return out;
}

// ---- JSON -------------------------------------------------------------------

inline Json interval_json(const Interval& i) { return Json::array({i.lower, i.upper}); }

inline Json to_json(const Scenario& s) {
  Json obs = Json::array();
  for (const Observer& o : s.observers) obs.push_back(Json::array({o.x, o.y}));
  const BoundaryConditions& b = s.boundary;
  const EngineNoiseParams& e = s.noise.engine;
  const NoiseModel noise = s.resolved_noise();
  return {
      {"scenario",
       {{"initial_time", s.initial_time},
        {"final_time", s.final_time},
        {"intervals", s.intervals},
        {"variant", to_string(s.variant)},
        {"fuel_cap_factor", s.fuel_cap_factor},
        {"starts", s.starts},
        {"seed", s.seed},
        {"perturbation", s.perturbation},
        {"boundary",
         {{"x0", b.x0}, {"y0", b.y0}, {"h0", b.h0}, {"V0", b.V0},
          {"xf", b.xf}, {"yf", b.yf}, {"hf", b.hf}}},
        {"observers", obs}}},
      {"aircraft",
       {{"mass", s.aircraft.mass},
        {"wing_area", s.aircraft.wing_area},
        {"lift_slope", s.aircraft.lift_slope},
        {"zero_lift_drag", s.aircraft.zero_lift_drag},
        {"induced_drag", s.aircraft.induced_drag},
        {"full_thrust", s.aircraft.full_thrust},
        {"specific_fuel", s.aircraft.specific_fuel},
        {"gravity", s.aircraft.gravity},
        {"sea_level_density", s.aircraft.sea_level_density}}},
      {"atmosphere",
       {{"sea_level_density", s.atmosphere.sea_level_density},
        {"sea_level_sound_speed", s.atmosphere.sea_level_sound_speed},
        {"lapse", s.atmosphere.lapse},
        {"exponent", s.atmosphere.exponent}}},
      {"engine_noise",
       {{"v1", e.v1}, {"v2", e.v2}, {"s1", e.s1}, {"s2", e.s2},
        {"tau1", e.tau1}, {"tau2", e.tau2}, {"rho1", e.rho1}, {"d", e.d},
        {"me", e.interaction_exponent()},
        {"temp_term_coeff", e.temp_term_coeff},
        {"directivity", s.noise.directivity == DirectivityMode::track_axis
                            ? "track_axis" : "velocity_vector"},
        {"track_heading", *noise.track_heading},
        {"corrections",
         {{"atmospheric", s.noise.corrections.atmospheric},
          {"ground", s.noise.corrections.ground},
          {"frequency", s.noise.corrections.frequency}}}}},
      {"bounds",
       {{"gamma", interval_json(s.bounds.gamma)},
        {"V", interval_json(s.bounds.V)},
        {"chi", interval_json(s.bounds.chi)},
        {"alpha", interval_json(s.bounds.alpha)},
        {"delta_x", interval_json(s.bounds.delta_x)},
        {"mu", interval_json(s.bounds.mu)},
        {"height", interval_json(s.bounds.height)},
        {"stall_speed", s.bounds.stall_speed}}},
  };
}

inline Json to_json(const SolverOptions& o) {
  return {{"max_iterations", o.max_iterations},
          {"feasibility_tolerance", o.feasibility_tolerance},
          {"optimality_tolerance", o.optimality_tolerance},
          {"initial_barrier", o.initial_barrier},
          {"armijo", o.armijo},
          {"backtrack", o.backtrack},
          {"max_backtracks", o.max_backtracks},
          {"bound_push", o.bound_push},
          {"time_limit", std::isfinite(o.time_limit) ? Json(o.time_limit) : Json(nullptr)},
          {"seed", o.seed}};
}

inline Json to_json(const SolveReport& r) {
  return {{"status", to_string(r.status)},
          {"objective", std::isfinite(r.objective) ? Json(r.objective) : Json(nullptr)},
          {"feasibility_error", r.feasibility_error},
          {"optimality_error", r.optimality_error},
          {"max_error", std::max(r.feasibility_error, r.optimality_error)},
          {"iterations", r.iterations},
          {"wall_time_s", r.wall_time},
          {"message", r.message}};
}

inline Json to_json(const VariantResult& r, const Scenario& scn) {
  Json levels = Json::array();
  for (std::size_t j = 0; j < r.leq.size(); ++j) {
    levels.push_back({{"x", scn.observers[j].x},
                      {"y", scn.observers[j].y},
                      {"leq_db", r.leq[j]}});
  }
  Json out = {{"variant", to_string(r.variant)},
              {"solve", to_json(r.report)},
              {"start_index", r.start_index},
              {"observers", levels},
              {"consumption_kg", r.consumption},
              {"throttle_bound_fraction", throttle_bound_fraction(r.trajectory, scn.bounds)},
              {"internode",
               {{"refine", 10},
                {"max_violation", r.internode.max_violation},
                {"interval", r.internode.interval},
                {"component", r.internode.component}}}};
  if (r.theta) out["theta_db"] = *r.theta;
  return out;
}

inline Json to_json(const std::vector<ManifestEntry>& m) {
  Json out = Json::array();
  for (const auto& e : m) {
    out.push_back({{"file", e.file}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  }
  return out;
}

// ---- runs -------------------------------------------------------------------

struct RunReport {
  Json body;
  std::vector<ManifestEntry> manifest;
  bool success = false;  // every solve optimal (and any asserted ordering holds)

  int exit_code() const { return success ? 0 : 1; }
};

namespace run_detail {

/// Writes the JSON report last; the manifest lists everything before it.
inline RunReport finish(ArtifactSet& files, Json body, bool success) {
  RunReport rep;
  rep.manifest = files.entries();
  body["success"] = success;
  body["manifest"] = to_json(rep.manifest);
  rep.body = std::move(body);
  rep.success = success;
  files.write("report.json", rep.body.dump(2) + "\n");
  return rep;
}

inline Json base_body(const char* command, const RunConfig& cfg) {
  return {{"command", command},
          {"config_source", cfg.source},
          {"config", to_json(cfg.scenario)},
          {"solver", to_json(cfg.solver)}};
}

inline SolverOptions with_log(const SolverOptions& o, std::ostream& log) {
  SolverOptions out = o;
  out.log = &log;
  out.record_history = false;
  return out;
}

}  // namespace run_detail

/// Solves the configured variant (observer 0 for single-observer objectives)
/// after the fuel reference.
inline RunReport run_solve(const RunConfig& cfg, const fs::path& out) {
  cfg.scenario.validate();
  ArtifactSet files(out);
  std::ostringstream log;
  const ScenarioOutcome o =
      run_scenario(cfg.scenario, run_detail::with_log(cfg.solver, log));
  const Scenario& scn = cfg.scenario;
  files.write("trajectory.csv", trajectory_csv(o.result.trajectory, scn));
  files.write("reference.csv", trajectory_csv(o.reference.trajectory, scn));
  files.write("iterations.log", log.str());
  Json body = run_detail::base_body("solve", cfg);
  body["result"] = to_json(o.result, scn);
  body["reference"] = to_json(o.reference, scn);
  if (o.noise) body["unconstrained_noise"] = to_json(*o.noise, scn);
  if (o.reference.consumption > 0.0 && o.result.consumption > 0.0) {
    const FuelComparison f = compare_consumption(o.result.consumption, o.reference.consumption);
    body["fuel_increase_percent"] = {{"over_trajectory", f.over_trajectory},
                                     {"over_reference", f.over_reference}};
  }
  return run_detail::finish(files, std::move(body), o.result.optimal());
}

/// One row of the observer sweep.
struct SweepRow {
  Observer observer;
  VariantResult noise;
  double reference_leq = 0.0;  // J1: noise of the fuel-optimal trajectory
};

/// Noise-minimal solves for each observer in turn, `jobs` at a time, against
/// one shared fuel reference. Each observer gets its own subdirectory.
inline RunReport run_sweep(const RunConfig& cfg, const std::vector<Observer>& observers,
                           const fs::path& out, int jobs = 1) {
  if (observers.empty()) throw ValidationError("sweep: no observers");
  Scenario base = cfg.scenario;
  base.variant = Variant::noise;
  base.observers = observers;
  base.validate();
  ArtifactSet files(out);
  std::ostringstream ref_log;
  const VariantResult reference =
      solve_fuel_reference(base, run_detail::with_log(cfg.solver, ref_log));
  files.write("reference.csv", trajectory_csv(reference.trajectory, base));
  files.write("reference_iterations.log", ref_log.str());

  std::vector<SweepRow> rows(observers.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t j = next++; j < observers.size(); j = next++) {
      try {
        Scenario scn = base;
        scn.observers = {observers[j]};
        std::ostringstream log;
        VariantResult r = solve_noise(scn, run_detail::with_log(cfg.solver, log), &reference);
        char dir[32];
        std::snprintf(dir, sizeof dir, "obs_%02zu/", j);
        files.write(std::string(dir) + "trajectory.csv", trajectory_csv(r.trajectory, scn));
        files.write(std::string(dir) + "iterations.log", log.str());
        rows[j] = {observers[j], std::move(r), reference.leq[j]};
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(observers.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw std::runtime_error("sweep: " + first_error);

  std::string table =
      "x_obs,y_obs,J_dB,max_error,cpu_s,J1_dB,J1_minus_J_dB,"
      "co_increase_over_trajectory_pct,co_increase_over_reference_pct,status\n";
  Json list = Json::array();
  bool success = reference.optimal();
  for (const SweepRow& r : rows) {
    const double j = r.noise.leq.front();
    const FuelComparison f = compare_consumption(r.noise.consumption, reference.consumption);
    const double err = std::max(r.noise.report.feasibility_error, r.noise.report.optimality_error);
    table += format_double(r.observer.x) + ',' + format_double(r.observer.y) + ',' +
             format_double(j) + ',' + format_double(err) + ',' +
             format_double(r.noise.report.wall_time) + ',' + format_double(r.reference_leq) +
             ',' + format_double(r.reference_leq - j) + ',' +
             format_double(f.over_trajectory) + ',' + format_double(f.over_reference) + ',' +
             to_string(r.noise.report.status) + '\n';
    Scenario one = base;
    one.observers = {r.observer};
    Json row = to_json(r.noise, one);
    row["reference_leq_db"] = r.reference_leq;
    row["gap_db"] = r.reference_leq - j;
    row["fuel_increase_percent"] = {{"over_trajectory", f.over_trajectory},
                                    {"over_reference", f.over_reference}};
    list.push_back(std::move(row));
    success = success && r.noise.optimal();
  }
  files.write("summary.csv", table);
  Json body = run_detail::base_body("sweep", cfg);
  body["reference"] = to_json(reference, base);
  body["rows"] = std::move(list);
  return run_detail::finish(files, std::move(body), success);
}

/// Noise optimum against the fuel reference at observer 0: J, J1, J1 - J and
/// both consumption normalisations. Succeeds only if J <= J1.
inline RunReport run_compare(const RunConfig& cfg, const fs::path& out) {
  Scenario scn = cfg.scenario;
  scn.variant = Variant::noise;
  scn.validate();
  ArtifactSet files(out);
  std::ostringstream log;
  const SolverOptions opts = run_detail::with_log(cfg.solver, log);
  const VariantResult reference = solve_fuel_reference(scn, opts);
  const VariantResult noise = solve_noise(scn, opts, &reference);
  files.write("trajectory.csv", trajectory_csv(noise.trajectory, scn));
  files.write("reference.csv", trajectory_csv(reference.trajectory, scn));
  files.write("iterations.log", log.str());
  const double j = noise.leq.front();
  const double j1 = reference.leq.front();
  const FuelComparison f = compare_consumption(noise.consumption, reference.consumption);
  Json body = run_detail::base_body("compare", cfg);
  body["result"] = to_json(noise, scn);
  body["reference"] = to_json(reference, scn);
  body["comparison"] = {{"J_dB", j},
                        {"J1_dB", j1},
                        {"J1_minus_J_dB", j1 - j},
                        {"dominates", j <= j1 + 1e-6},
                        {"co_increase_over_trajectory_pct", f.over_trajectory},
                        {"co_increase_over_reference_pct", f.over_reference}};
  const bool ok = noise.optimal() && reference.optimal() && j <= j1 + 1e-6;
  return run_detail::finish(files, std::move(body), ok);
}

/// Largest violation of the path bounds at the nodes, in physical units.
inline double path_bound_violation(const Trajectory& t, const PathBounds& b) {
  double v = 0.0;
  for (const State<>& s : t.states) {
    v = std::max({v, b.V.violation(s.V), b.gamma.violation(s.gamma),
                  b.chi.violation(s.chi), b.height.violation(s.h)});
  }
  for (const Control<>& u : t.controls) {
    v = std::max({v, b.alpha.violation(u.alpha), b.delta_x.violation(u.delta_x),
                  b.mu.violation(u.mu)});
  }
  return v;
}

/// Forward-simulates a control history from the initial boundary state and
/// reports noise and fuel without optimising. Initial gamma and chi come
/// from the file's gamma/chi columns when present, otherwise level flight
/// along the track axis.
inline RunReport run_evaluate(const RunConfig& cfg, const fs::path& controls_file,
                              const fs::path& out) {
  const Scenario& scn = cfg.scenario;
  scn.validate();
  std::ifstream in(controls_file);
  if (!in) throw ValidationError("evaluate: cannot read '" + controls_file.string() + "'");
  const ControlFile file = read_control_file(in, scn.intervals);
  const State<> z0{scn.boundary.V0, file.gamma0.value_or(0.0),
                   file.chi0.value_or(scn.track_heading()), scn.boundary.x0,
                   scn.boundary.y0, scn.boundary.h0};
  ArtifactSet files(out);
  const Trajectory traj = simulate(z0, file.controls, grid_for(scn), RkScheme::heun(),
                                   scn.aircraft, scn.atmosphere);
  files.write("trajectory.csv", trajectory_csv(traj, scn));
  const std::vector<double> levels = observer_levels(scn, traj);
  Json obs = Json::array();
  for (std::size_t j = 0; j < levels.size(); ++j) {
    obs.push_back({{"x", scn.observers[j].x}, {"y", scn.observers[j].y},
                   {"leq_db", levels[j]}});
  }
  const State<>& end = traj.states.back();
  Json body = run_detail::base_body("evaluate", cfg);
  body["controls_file"] = controls_file.string();
  body["observers"] = obs;
  body["consumption_kg"] = total_consumption(traj, scn.aircraft, scn.atmosphere);
  body["final_miss_m"] = {{"x", end.x - scn.boundary.xf},
                          {"y", end.y - scn.boundary.yf},
                          {"h", end.h - scn.boundary.hf}};
  body["path_bound_violation"] = path_bound_violation(traj, scn.bounds);
  return run_detail::finish(files, std::move(body), true);
}

}  // namespace quietpath

#pragma once

// Scenario files: YAML with the sections scenario, aircraft, atmosphere,
// engine_noise, bounds and solver. Every section and key is optional and
// falls back to the built-in default; unknown keys are errors. Angles are
// given in rad under the plain key or in degrees under the key with a
// "_deg" suffix, never both.

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "quietpath/errors.hpp"
#include "quietpath/nlp_solver.hpp"
#include "quietpath/scenario.hpp"

namespace quietpath {

struct RunConfig {
  Scenario scenario;
  SolverOptions solver;
  std::string source;  // file the configuration came from, empty if built in
};

namespace config_detail {

inline std::string where(const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.is_null()) return "";
  return " (line " + std::to_string(m.line + 1) + ")";
}

[[noreturn]] inline void fail(const std::string& key, const YAML::Node& node,
                              const std::string& what) {
  throw ValidationError("config: " + key + where(node) + ": " + what);
}

/// A mapping whose keys must all be consumed.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      fail(path_, node_, "expected a mapping");
    }
  }

  bool has(const std::string& key) const {
    return node_ && node_.IsMap() && get(key) && !get(key).IsNull();
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  YAML::Node take(const std::string& key) {
    used_.insert(key);
    return has(key) ? get(key) : YAML::Node(YAML::NodeType::Undefined);
  }

  Section child(const std::string& key) { return Section(take(key), key_path(key)); }

  void number(const std::string& key, double& out) {
    const YAML::Node n = take(key);
    if (n) out = as_number(n, key_path(key));
  }

  void positive(const std::string& key, double& out) {
    number(key, out);
    if (has(key) && !(out > 0.0)) fail(key_path(key), get(key), "must be > 0");
  }

  void integer(const std::string& key, int& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    const double v = as_number(n, key_path(key));
    if (v != std::floor(v) || std::abs(v) > 1e9) {
      fail(key_path(key), n, "expected an integer");
    }
    out = static_cast<int>(v);
  }

  void angle(const std::string& key, double& out) {
    const std::string deg_key = key + "_deg";
    if (has(key) && has(deg_key)) {
      fail(key_path(deg_key), get(deg_key), "given together with '" + key + "'");
    }
    number(key, out);
    const YAML::Node n = take(deg_key);
    if (n) out = deg(as_number(n, key_path(deg_key)));
  }

  void interval(const std::string& key, Interval& out, bool is_angle) {
    const std::string deg_key = key + "_deg";
    if (is_angle && has(key) && has(deg_key)) {
      fail(key_path(deg_key), get(deg_key), "given together with '" + key + "'");
    }
    if (const YAML::Node n = take(key)) out = as_interval(n, key_path(key), false);
    if (is_angle) {
      if (const YAML::Node n = take(deg_key)) out = as_interval(n, key_path(deg_key), true);
    }
  }

  void text(const std::string& key, std::string& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    if (!n.IsScalar()) fail(key_path(key), n, "expected a string");
    out = n.Scalar();
  }

  /// Rejects keys that no reader asked for.
  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!used_.count(key)) fail(key_path(key), kv.first, "unknown key");
    }
  }

  static double as_number(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(key, n, "expected a number");
    const std::string& s = n.Scalar();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) {
      fail(key, n, "expected a finite number, got '" + s + "'");
    }
    return v;
  }

  // Degrees convert through deg() so that files reproduce built-in defaults.
  static Interval as_interval(const YAML::Node& n, const std::string& key,
                              bool degrees) {
    if (!n.IsSequence() || n.size() != 2) {
      fail(key, n, "expected [lower, upper]");
    }
    auto value = [&](const YAML::Node& v) {
      const double x = as_number(v, key);
      return degrees ? deg(x) : x;
    };
    Interval iv{value(n[0]), value(n[1])};
    if (!(iv.lower < iv.upper)) fail(key, n, "lower must be below upper");
    return iv;
  }

 private:
  // Const access: a lookup must not insert the key.
  YAML::Node get(const std::string& key) const {
    const YAML::Node& n = node_;
    return n[key];
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

inline std::vector<Observer> parse_observers(const YAML::Node& n,
                                             const std::string& key) {
  if (!n.IsSequence()) fail(key, n, "expected a list of [x, y] pairs");
  std::vector<Observer> out;
  for (const YAML::Node& item : n) {
    if (item.IsSequence() && item.size() == 2) {
      out.push_back({Section::as_number(item[0], key), Section::as_number(item[1], key)});
    } else if (item.IsMap()) {
      Section s(item, key);
      Observer o;
      s.number("x", o.x);
      s.number("y", o.y);
      s.finish();
      out.push_back(o);
    } else {
      fail(key, item, "expected [x, y] or {x: .., y: ..}");
    }
  }
  return out;
}

inline void parse_scenario(Section s, Scenario& scn) {
  s.number("initial_time", scn.initial_time);
  s.number("final_time", scn.final_time);
  s.integer("intervals", scn.intervals);
  s.number("fuel_cap_factor", scn.fuel_cap_factor);
  s.integer("starts", scn.starts);
  s.number("perturbation", scn.perturbation);
  if (const YAML::Node n = s.take("seed")) {
    const double v = Section::as_number(n, s.key_path("seed"));
    if (v < 0.0 || v != std::floor(v)) fail(s.key_path("seed"), n, "expected a non-negative integer");
    scn.seed = static_cast<std::uint64_t>(v);
  }
  std::string variant;
  s.text("variant", variant);
  if (!variant.empty()) {
    try {
      scn.variant = parse_variant(variant);
    } catch (const ValidationError& e) {
      fail(s.key_path("variant"), YAML::Node(), e.what());
    }
  }
  {
    Section b = s.child("boundary");
    BoundaryConditions& bc = scn.boundary;
    b.number("x0", bc.x0);
    b.number("y0", bc.y0);
    b.number("h0", bc.h0);
    b.number("V0", bc.V0);
    b.number("xf", bc.xf);
    b.number("yf", bc.yf);
    b.number("hf", bc.hf);
    b.finish();
  }
  if (s.has("observers")) {
    scn.observers = parse_observers(s.take("observers"), s.key_path("observers"));
  } else {
    s.take("observers");
    // A noise objective needs receivers named explicitly.
    if (scn.variant != Variant::fuel) {
      fail(s.key_path("observers"), YAML::Node(YAML::NodeType::Undefined),
           "required for the noise variants");
    }
  }
  s.finish();
}

inline void parse_aircraft(Section s, AircraftModel& a) {
  s.positive("mass", a.mass);
  s.positive("wing_area", a.wing_area);
  s.positive("lift_slope", a.lift_slope);
  s.positive("zero_lift_drag", a.zero_lift_drag);
  s.positive("induced_drag", a.induced_drag);
  s.positive("full_thrust", a.full_thrust);
  s.positive("specific_fuel", a.specific_fuel);
  s.positive("gravity", a.gravity);
  s.positive("sea_level_density", a.sea_level_density);
  s.finish();
}

inline void parse_atmosphere(Section s, Atmosphere& a) {
  s.positive("sea_level_density", a.sea_level_density);
  s.positive("sea_level_sound_speed", a.sea_level_sound_speed);
  s.positive("lapse", a.lapse);
  s.positive("exponent", a.exponent);
  s.finish();
}

inline void parse_engine_noise(Section s, NoiseModel& n) {
  EngineNoiseParams& e = n.engine;
  s.positive("v1", e.v1);
  s.number("v2", e.v2);
  s.positive("s1", e.s1);
  s.positive("s2", e.s2);
  s.positive("tau1", e.tau1);
  s.positive("tau2", e.tau2);
  s.positive("rho1", e.rho1);
  s.positive("d", e.d);
  if (s.has("me")) {
    double me = 0.0;
    s.number("me", me);
    e.me = me;
  } else {
    s.take("me");
  }
  s.number("temp_term_coeff", e.temp_term_coeff);
  std::string mode;
  s.text("directivity", mode);
  if (mode == "velocity_vector") {
    n.directivity = DirectivityMode::velocity_vector;
  } else if (mode == "track_axis") {
    n.directivity = DirectivityMode::track_axis;
  } else if (!mode.empty()) {
    fail(s.key_path("directivity"), YAML::Node(),
         "expected velocity_vector or track_axis, got '" + mode + "'");
  }
  if (s.has("track_heading") || s.has("track_heading_deg")) {
    double heading = 0.0;
    s.angle("track_heading", heading);
    n.track_heading = heading;
  } else {
    s.take("track_heading");
    s.take("track_heading_deg");
  }
  {
    Section c = s.child("corrections");
    c.number("atmospheric", n.corrections.atmospheric);
    c.number("ground", n.corrections.ground);
    c.number("frequency", n.corrections.frequency);
    c.finish();
  }
  s.finish();
}

inline void parse_bounds(Section s, PathBounds& b) {
  s.interval("gamma", b.gamma, true);
  s.interval("V", b.V, false);
  s.interval("chi", b.chi, true);
  s.interval("alpha", b.alpha, true);
  s.interval("delta_x", b.delta_x, false);
  s.interval("mu", b.mu, true);
  s.interval("height", b.height, false);
  s.positive("stall_speed", b.stall_speed);
  s.finish();
}

inline void parse_solver(Section s, SolverOptions& o) {
  s.integer("max_iterations", o.max_iterations);
  s.positive("feasibility_tolerance", o.feasibility_tolerance);
  s.positive("optimality_tolerance", o.optimality_tolerance);
  s.positive("initial_barrier", o.initial_barrier);
  s.number("armijo", o.armijo);
  s.number("backtrack", o.backtrack);
  s.integer("max_backtracks", o.max_backtracks);
  s.number("bound_push", o.bound_push);
  s.positive("time_limit", o.time_limit);
  s.finish();
}

}  // namespace config_detail

/// Parses YAML text into a validated configuration. `source` names the text
/// in messages.
inline RunConfig parse_config_text(const std::string& text,
                                   const std::string& source = "<text>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ValidationError("config " + source + ": " + e.what());
  }
  RunConfig cfg;
  cfg.source = source;
  try {
    config_detail::Section top(root, "");
    config_detail::parse_scenario(top.child("scenario"), cfg.scenario);
    config_detail::parse_aircraft(top.child("aircraft"), cfg.scenario.aircraft);
    config_detail::parse_atmosphere(top.child("atmosphere"), cfg.scenario.atmosphere);
    config_detail::parse_engine_noise(top.child("engine_noise"), cfg.scenario.noise);
    config_detail::parse_bounds(top.child("bounds"), cfg.scenario.bounds);
    config_detail::parse_solver(top.child("solver"), cfg.solver);
    top.finish();
    cfg.scenario.validate();
    cfg.solver.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  } catch (const YAML::Exception& e) {
    throw ValidationError("config " + source + ": " + e.what());
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot read '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path);
}

}  // namespace quietpath

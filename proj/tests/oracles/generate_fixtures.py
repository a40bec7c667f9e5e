"""Freeze oracle values into tests/data/*.csv.

Inputs are drawn from a seeded generator, rounded to doubles and written with
17 significant digits, so the C++ side reads back exactly the values the
oracle evaluated. Run from the repository root:

    python3 tests/oracles/generate_fixtures.py
"""

import csv
import pathlib
import random

import mpmath as mp

import model_oracle as oracle

CASES = 120
DATA = pathlib.Path(__file__).resolve().parent.parent / "data"

AIRCRAFT = {
    "mass": mp.mpf(60000),
    "wing_area": mp.mpf(122),
    "lift_slope": mp.mpf(5),
    "zero_lift_drag": mp.mpf("0.025"),
    "induced_drag": mp.mpf("0.05"),
    "full_thrust": mp.mpf(234000),
    "gravity": mp.mpf("9.8"),
}


def f17(x):
    return "%.17g" % float(x)


def write(name, header, rows):
    DATA.mkdir(parents=True, exist_ok=True)
    with open(DATA / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f17(v) for v in r])


def uniform(rng, lo, hi):
    # A double, so the oracle sees exactly what the C++ side parses.
    return float(rng.uniform(lo, hi))


def mpf(x):
    return mp.mpf(float(x))


def atmosphere(rng):
    rows = []
    for _ in range(CASES):
        h = uniform(rng, 0.0, 11000.0)
        rows.append([h, oracle.air_density(mpf(h)), oracle.speed_of_sound(mpf(h))])
    write("atmosphere.csv", ["h", "rho", "c"], rows)


def forces(rng):
    rows = []
    ac = AIRCRAFT
    for _ in range(CASES):
        h = uniform(rng, 0.0, 11000.0)
        V = uniform(rng, 60.0, 250.0)
        dx = uniform(rng, 0.0, 1.0)
        alpha = uniform(rng, -0.05, 0.25)
        rows.append([
            h, V, dx, alpha,
            oracle.thrust(mpf(h), mpf(V), mpf(dx), ac["full_thrust"]),
            oracle.lift(mpf(h), mpf(V), mpf(alpha), ac["wing_area"], ac["lift_slope"]),
            oracle.drag(mpf(h), mpf(V), mpf(alpha), ac["wing_area"], ac["lift_slope"],
                        ac["zero_lift_drag"], ac["induced_drag"]),
        ])
    write("forces.csv", ["h", "V", "delta_x", "alpha", "thrust", "lift", "drag"], rows)


def dynamics(rng):
    rows = []
    for _ in range(CASES):
        state = [uniform(rng, 80.0, 200.0), uniform(rng, -0.2, 0.1), uniform(rng, -0.6, 0.6),
                 uniform(rng, -1e4, 7e4), uniform(rng, -5e3, 1e4), uniform(rng, 0.0, 10000.0)]
        control = [uniform(rng, -0.04, 0.2), uniform(rng, 0.0, 1.0), uniform(rng, -0.45, 0.45)]
        d = oracle.dynamics([mpf(v) for v in state], [mpf(v) for v in control], AIRCRAFT)
        rows.append(state + control + d)
    write("dynamics.csv",
          ["V", "gamma", "chi", "x", "y", "h", "alpha", "delta_x", "mu",
           "dV", "dgamma", "dchi", "dx", "dy", "dh"], rows)


def random_engine(rng):
    v1 = uniform(rng, 300.0, 450.0)
    return {
        "v1": v1,
        "v2": uniform(rng, 150.0, 0.9 * v1),
        "s1": uniform(rng, 0.3, 0.6),
        "s2": uniform(rng, 1.2, 2.5),
        "tau1": uniform(rng, 600.0, 900.0),
        "tau2": uniform(rng, 270.0, 300.0),
        "rho1": uniform(rng, 0.4, 0.6),
        "d": uniform(rng, 0.7, 1.1),
        "me": uniform(rng, 1.5, 3.5) if rng.random() < 0.5 else None,
        "temp_term_coeff": uniform(rng, 0.5, 10.0),
    }


def jet_factors(rng):
    rows = []
    for _ in range(CASES):
        v1 = uniform(rng, 300.0, 450.0)
        V = uniform(rng, 60.0, 200.0)
        h = uniform(rng, 0.0, 10000.0)
        cos_theta = uniform(rng, -1.0, 1.0)
        c = oracle.speed_of_sound(mpf(h))
        Ve = oracle.effective_speed(mpf(V), mpf(v1))
        Mc = oracle.convection_mach(mpf(v1), mpf(V), c)
        rows.append([v1, V, h, cos_theta, Ve, oracle.density_exponent(Ve, c), Mc,
                     oracle.doppler(Mc, mpf(cos_theta))])
    write("jet_factors.csv",
          ["v1", "V", "h", "cos_theta", "effective_speed", "density_exponent",
           "convection_mach", "doppler"], rows)


def jet_noise(rng):
    rows = []
    for i in range(CASES):
        eng = random_engine(rng)
        V = uniform(rng, 80.0, min(200.0, 0.9 * eng["v1"]))
        state = [V, uniform(rng, -0.15, 0.05), uniform(rng, -0.5, 0.5),
                 uniform(rng, -1e4, 7e4), uniform(rng, -5e3, 1e4), uniform(rng, 100.0, 10000.0)]
        obs = [uniform(rng, 0.0, 60000.0), uniform(rng, 0.0, 5000.0)]
        mode = i % 2
        heading = uniform(rng, -0.5, 0.5)
        eng_mp = {k: (None if v is None else mpf(v)) for k, v in eng.items()}
        level = oracle.jet_noise_level([mpf(v) for v in state], [mpf(v) for v in obs], eng_mp,
                                       "track_axis" if mode else "velocity_vector", mpf(heading))
        me = -1.0 if eng["me"] is None else eng["me"]
        rows.append(state + obs + [mode, heading, eng["v1"], eng["v2"], eng["s1"], eng["s2"],
                                   eng["tau1"], eng["tau2"], eng["rho1"], eng["d"], me,
                                   eng["temp_term_coeff"], level])
    write("jet_noise.csv",
          ["V", "gamma", "chi", "x", "y", "h", "obs_x", "obs_y", "track_axis", "heading",
           "v1", "v2", "s1", "s2", "tau1", "tau2", "rho1", "d", "me", "temp_term_coeff",
           "level"], rows)


def leq(rng):
    rows = []
    n = 11
    for _ in range(CASES):
        t0 = uniform(rng, 0.0, 100.0)
        tf = t0 + uniform(rng, 10.0, 1000.0)
        levels = [uniform(rng, 20.0, 110.0) for _ in range(n)]
        times = [mpf(t0) + (mpf(tf) - mpf(t0)) * k / (n - 1) for k in range(n)]
        rows.append([t0, tf] + levels + [oracle.leq_trapezoid(times, [mpf(v) for v in levels])])
    write("leq.csv", ["t0", "tf"] + ["L%d" % k for k in range(n)] + ["leq"], rows)


def main():
    rng = random.Random(20240611)
    atmosphere(rng)
    forces(rng)
    dynamics(rng)
    jet_factors(rng)
    jet_noise(rng)
    leq(rng)


if __name__ == "__main__":
    main()

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "quietpath/scenarios.hpp"
#include "quietpath/transcription.hpp"

namespace qp = quietpath;
using qp::Index;
using qp::Matrix;
using qp::SparseMatrix;
using qp::Vector;

namespace {

qp::Scenario small_scenario() {
  qp::Scenario s;
  s.intervals = 6;
  s.observers = {{0.0, 0.0}, {30000.0, 2500.0}};
  return s;
}

// A generic interior point: the perturbed guess, not the symmetric straight line.
Vector probe_point(const qp::TranscribedProblem& p) {
  const qp::Scenario& s = p.scenario();
  const qp::Trajectory t = qp::perturbed_guess(qp::initial_guess(s), s, 3);
  double theta = 0.0;
  for (double l : qp::observer_levels(s, t)) theta = std::max(theta, l);
  return p.pack(t, theta + 0.5);
}

Vector probe_multipliers(Index m) {
  Vector l(m);
  for (Index i = 0; i < m; ++i) l[i] = 0.3 * std::sin(1.7 * static_cast<double>(i) + 0.4);
  return l;
}

double step_for(double v) { return 1e-6 * std::max(1.0, std::abs(v)); }

struct Variant {
  const char* name;
  qp::TranscriptionOptions options;
};

std::vector<Variant> variants() {
  qp::TranscriptionOptions noise;
  qp::TranscriptionOptions fuel;
  fuel.objective = qp::ObjectiveKind::fuel;
  qp::TranscriptionOptions capped;
  capped.observer = 1;
  capped.fuel_cap = 900.0;
  qp::TranscriptionOptions minimax;
  minimax.objective = qp::ObjectiveKind::epigraph;
  return {{"noise", noise}, {"fuel", fuel}, {"capped", capped}, {"minimax", minimax}};
}

std::shared_ptr<qp::TranscribedProblem> build(const qp::TranscriptionOptions& o) {
  const qp::Scenario s = small_scenario();
  return qp::assemble(s, qp::grid_for(s), qp::RkScheme::heun(), o);
}

// Short horizon: open-loop simulation of the guess stays bounded over 5 s steps.
std::shared_ptr<qp::TranscribedProblem> build_short() {
  qp::Scenario s = small_scenario();
  s.final_time = 30.0;
  return qp::assemble(s, qp::grid_for(s));
}

TEST(Transcription, GradientMatchesCentralDifferences) {
  for (const auto& v : variants()) {
    const auto p = build(v.options);
    const Vector w = probe_point(*p);
    Vector g;
    p->gradient(w, g);
    Vector x = w;
    for (Index i = 0; i < w.size(); ++i) {
      const double h = step_for(w[i]);
      x[i] = w[i] + h;
      const double fp = p->objective(x);
      x[i] = w[i] - h;
      const double fm = p->objective(x);
      x[i] = w[i];
      const double fd = (fp - fm) / (2.0 * h);
      EXPECT_NEAR(g[i], fd, 1e-6 * (1.0 + std::abs(fd))) << v.name << " column " << i;
    }
  }
}

TEST(Transcription, JacobianMatchesCentralDifferences) {
  for (const auto& v : variants()) {
    const auto p = build(v.options);
    const Vector w = probe_point(*p);
    SparseMatrix J;
    p->jacobian(w, J);
    ASSERT_EQ(J.rows(), p->num_constraints());
    ASSERT_EQ(J.cols(), p->num_variables());
    const Matrix Jd(J);
    Vector x = w;
    Vector cp;
    Vector cm;
    for (Index i = 0; i < w.size(); ++i) {
      const double h = step_for(w[i]);
      x[i] = w[i] + h;
      p->constraints(x, cp);
      x[i] = w[i] - h;
      p->constraints(x, cm);
      x[i] = w[i];
      const Vector fd = (cp - cm) / (2.0 * h);
      for (Index r = 0; r < fd.size(); ++r) {
        EXPECT_NEAR(Jd(r, i), fd[r], 1e-6 * (1.0 + std::abs(fd[r])))
            << v.name << " row " << r << " column " << i;
      }
    }
  }
}

TEST(Transcription, HessianMatchesDifferencedLagrangianGradient) {
  for (const auto& v : variants()) {
    const auto p = build(v.options);
    const qp::NlpProblem nlp = p->nlp();
    const Vector w = probe_point(*p);
    const Vector lambda = probe_multipliers(p->num_constraints());
    const double sigma = 0.7;
    Matrix H;
    Matrix fd;
    p->hessian(w, sigma, lambda, H);
    qp::finite_difference_hessian(nlp, w, sigma, lambda, fd);
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    EXPECT_LE((H - fd).cwiseAbs().maxCoeff(), 1e-5 * scale) << v.name;
    EXPECT_LE((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-12 * scale) << v.name;
  }
}

TEST(Transcription, SplitHessianReassemblesToDenseHessian) {
  for (const auto& v : variants()) {
    const auto p = build(v.options);
    const Vector w = probe_point(*p);
    const Vector lambda = probe_multipliers(p->num_constraints());
    Matrix dense;
    Matrix base;
    std::vector<qp::LowRankTerm> terms;
    p->hessian(w, 1.3, lambda, dense);
    p->hessian_split(w, 1.3, lambda, base, &terms);
    for (const auto& t : terms) {
      const Index n = t.direction.size();
      base.topLeftCorner(n, n) += t.weight * t.direction * t.direction.transpose();
    }
    const double scale = std::max(1.0, dense.cwiseAbs().maxCoeff());
    EXPECT_LE((dense - base).cwiseAbs().maxCoeff(), 1e-12 * scale) << v.name;
  }
}

TEST(Transcription, NoiseLevelRankOneTermsLeaveBaseBlockSparse) {
  const auto p = build({});
  const Vector w = probe_point(*p);
  Matrix base;
  std::vector<qp::LowRankTerm> terms;
  p->hessian_split(w, 1.0, Vector::Zero(p->num_constraints()), base, &terms);
  ASSERT_EQ(terms.size(), 1u);
  const auto& layout = p->layout();
  // Only same-node state couplings remain in the base.
  for (Index r = 0; r < base.rows(); ++r) {
    for (Index c = 0; c < base.cols(); ++c) {
      if (base(r, c) == 0.0) continue;
      ASSERT_LT(r, layout.num_state_entries());
      ASSERT_LT(c, layout.num_state_entries());
      EXPECT_EQ(r / 6, c / 6);
    }
  }
}

TEST(Transcription, JacobianStaysInsideDeclaredPattern) {
  for (const auto& v : variants()) {
    const auto p = build(v.options);
    const std::set<std::pair<Index, Index>> pattern(p->jacobian_pattern().begin(),
                                                    p->jacobian_pattern().end());
    SparseMatrix J;
    p->jacobian(probe_point(*p), J);
    for (int k = 0; k < J.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(J, k); it; ++it) {
        if (it.value() == 0.0) continue;
        EXPECT_TRUE(pattern.count({it.row(), it.col()})) << v.name << " " << it.row() << "," << it.col();
      }
    }
  }
}

TEST(Transcription, LayoutSizesFollowGrid) {
  const auto p = build({});
  const int N = 6;
  EXPECT_EQ(p->num_variables(), 6 * (N + 1) + 3 * N);
  EXPECT_EQ(p->num_equalities(), 6 * N + 7);
  EXPECT_EQ(p->num_inequalities(), 0);
  EXPECT_EQ(p->path_rows().size(), static_cast<std::size_t>(6 * (N + 1)));
  qp::TranscriptionOptions mm;
  mm.objective = qp::ObjectiveKind::epigraph;
  mm.fuel_cap = 1000.0;
  const auto q = build(mm);
  EXPECT_EQ(q->num_variables(), 6 * (N + 1) + 3 * N + 1);
  EXPECT_EQ(q->num_inequalities(), 3);
  EXPECT_EQ(q->epigraph_row(1), q->num_equalities() + 2);
}

TEST(Transcription, ScaleFactorsArePowersOfTwoSoPackingIsExact) {
  for (double s : qp::Scaling::state) {
    int e = 0;
    EXPECT_EQ(std::frexp(s, &e), 0.5);
  }
  for (double s : qp::Scaling::control) {
    int e = 0;
    EXPECT_EQ(std::frexp(s, &e), 0.5);
  }
  const auto p = build({});
  const qp::Trajectory t = qp::initial_guess(p->scenario());
  const qp::Trajectory back = p->trajectory(p->pack(t));
  EXPECT_EQ(back.states, t.states);
  EXPECT_EQ(back.controls, t.controls);
  EXPECT_EQ(back.times, t.times);
}

TEST(Transcription, PackRejectsWrongShapes) {
  const auto p = build({});
  qp::Trajectory t = qp::initial_guess(p->scenario());
  t.controls.pop_back();
  EXPECT_THROW(p->pack(t), qp::ValidationError);
  EXPECT_THROW(p->trajectory(Vector::Zero(5)), qp::ValidationError);
}

TEST(Transcription, SimulatedTrajectoryHasZeroDefects) {
  const auto p = build_short();
  const qp::Scenario& s = p->scenario();
  const qp::Trajectory guess = qp::initial_guess(s);
  const qp::Trajectory sim = qp::simulate(guess.states.front(), guess.controls, p->grid(),
                                          qp::RkScheme::heun(), s.aircraft, s.atmosphere);
  Vector c;
  p->constraints(p->pack(sim), c);
  EXPECT_LE(c.head(p->num_defects()).cwiseAbs().maxCoeff(), 1e-13);
  // Initial boundary rows hold by construction.
  for (int r = 0; r < 4; ++r) EXPECT_EQ(c[p->num_defects() + r], 0.0);
}

TEST(Transcription, DefectDetectsStateMismatch) {
  const auto p = build_short();
  const qp::Scenario& s = p->scenario();
  const qp::Trajectory guess = qp::initial_guess(s);
  qp::Trajectory sim = qp::simulate(guess.states.front(), guess.controls, p->grid(),
                                    qp::RkScheme::heun(), s.aircraft, s.atmosphere);
  sim.states[3].h += 64.0;
  Vector c;
  p->constraints(p->pack(sim), c);
  // Row 6*2+5 is the height defect entering node 3, in units of 1024 m.
  EXPECT_NEAR(c[6 * 2 + 5], 64.0 / 1024.0, 1e-13);
}

TEST(Transcription, EvaluationFailureIsTaggedWithNode) {
  const auto p = build({});
  Vector w = probe_point(*p);
  w[p->layout().state(4, 5)] = 50000.0 / 1024.0;  // above the density-law ceiling
  Vector c;
  try {
    p->constraints(w, c);
    FAIL() << "expected a node evaluation error";
  } catch (const qp::NodeEvaluationError& e) {
    EXPECT_EQ(e.node(), 4);
  }
}

TEST(Transcription, ObjectiveEqualsLeqOfUnpackedTrajectory) {
  const auto p = build({});
  const Vector w = probe_point(*p);
  const qp::Scenario& s = p->scenario();
  const double want = qp::leq(p->trajectory(w), s.observers[0], s.resolved_noise(),
                              s.atmosphere, s.aircraft);
  EXPECT_NEAR(p->objective(w), want, 1e-12 * want);
  qp::TranscriptionOptions fuel;
  fuel.objective = qp::ObjectiveKind::fuel;
  const auto q = build(fuel);
  const double co = qp::total_consumption(q->trajectory(w), s.aircraft, s.atmosphere);
  EXPECT_NEAR(q->objective(w), co, 1e-12 * co);
}

TEST(Transcription, InternodeReportNamesWorstComponentAndInterval) {
  const auto p = build({});
  Vector w = probe_point(*p);
  const double upper = p->scenario().bounds.gamma.upper;
  for (int k = 0; k <= 6; ++k) {
    Index i = p->layout().state(k, 1);
    w[i] = std::min(w[i], upper);
  }
  w[p->layout().state(3, 1)] = upper + 0.01;
  const qp::InterNodeReport nodes_only = p->internode_violation(w, 1);
  EXPECT_EQ(nodes_only.component, "gamma");
  EXPECT_EQ(nodes_only.interval, 3);
  EXPECT_NEAR(nodes_only.max_violation, 0.01, 1e-15);
  EXPECT_GE(p->internode_violation(w, 10).max_violation, nodes_only.max_violation);
}

TEST(Transcription, InvalidOptionsAreRejected) {
  qp::TranscriptionOptions bad_observer;
  bad_observer.observer = 2;
  EXPECT_THROW(build(bad_observer), qp::ValidationError);
  qp::TranscriptionOptions bad_cap;
  bad_cap.fuel_cap = 0.0;
  EXPECT_THROW(build(bad_cap), qp::ValidationError);
  qp::Scenario s = small_scenario();
  s.final_time = s.initial_time;
  EXPECT_THROW(qp::assemble(s, qp::Grid{0.0, 600.0, 6}), qp::ValidationError);
  EXPECT_THROW(qp::Grid({0.0, 600.0, 1}).validate(), qp::ValidationError);
}

TEST(RungeKutta, HeunIsSecondOrderOnLinearDecay) {
  auto rhs = [](const qp::State<>& s, const qp::Control<>&) {
    qp::State<> d;
    d.V = -s.V;
    return d;
  };
  qp::State<> z;
  z.V = 1.0;
  const double h = 0.1;
  const qp::State<> next = qp::heun_step(z, qp::Control<>{}, h, rhs);
  EXPECT_DOUBLE_EQ(next.V, 1.0 - h + 0.5 * h * h);
  const qp::State<> euler = qp::rk_step(z, qp::Control<>{}, h, qp::RkScheme::explicit_euler(), rhs);
  EXPECT_DOUBLE_EQ(euler.V, 1.0 - h);
}

TEST(RungeKutta, TableauValidation) {
  EXPECT_NO_THROW(qp::RkScheme::heun().validate());
  qp::RkScheme implicit = qp::RkScheme::heun();
  implicit.a[0][0] = 0.5;
  EXPECT_THROW(implicit.validate(), qp::ValidationError);
  qp::RkScheme inconsistent = qp::RkScheme::heun();
  inconsistent.b[0] = 0.7;
  EXPECT_THROW(inconsistent.validate(), qp::ValidationError);
}

TEST(RungeKutta, SimulateNeedsOneControlPerInterval) {
  const qp::Scenario s = small_scenario();
  EXPECT_THROW(qp::simulate(qp::State<>{}, std::vector<qp::Control<>>(2), qp::grid_for(s),
                            qp::RkScheme::heun(), s.aircraft, s.atmosphere),
               qp::ValidationError);
}

}  // namespace

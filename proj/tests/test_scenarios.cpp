#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "quietpath/scenarios.hpp"

namespace qp = quietpath;

namespace {

qp::Scenario coarse() {
  qp::Scenario s;
  s.intervals = 20;
  return s;
}

TEST(InitialGuess, ReproducesBoundaryValuesAndStaysInBounds) {
  const qp::Scenario s = coarse();
  const qp::Trajectory t = qp::initial_guess(s);
  ASSERT_NO_THROW(t.validate());
  EXPECT_EQ(t.intervals(), s.intervals);
  const auto& b = s.boundary;
  EXPECT_EQ(t.states.front().x, b.x0);
  EXPECT_EQ(t.states.front().y, b.y0);
  EXPECT_EQ(t.states.front().h, b.h0);
  EXPECT_EQ(t.states.front().V, b.V0);
  EXPECT_EQ(t.states.back().x, b.xf);
  EXPECT_EQ(t.states.back().y, b.yf);
  EXPECT_EQ(t.states.back().h, b.hf);
  const auto& pb = s.bounds;
  for (const auto& z : t.states) {
    EXPECT_TRUE(pb.V.contains(z.V));
    EXPECT_TRUE(pb.gamma.contains(z.gamma));
    EXPECT_TRUE(pb.chi.contains(z.chi));
  }
  for (const auto& u : t.controls) {
    EXPECT_TRUE(pb.alpha.contains(u.alpha));
    EXPECT_TRUE(pb.delta_x.contains(u.delta_x));
    EXPECT_EQ(u.mu, 0.0);
  }
}

TEST(InitialGuess, StraightTrackHasConstantAngles) {
  const qp::Trajectory t = qp::initial_guess(coarse());
  for (const auto& z : t.states) {
    EXPECT_EQ(z.gamma, t.states[0].gamma);
    EXPECT_EQ(z.chi, t.states[0].chi);
  }
  EXPECT_LT(t.states[0].gamma, 0.0);
}

TEST(InitialGuess, DegenerateHorizonIsRejected) {
  qp::Scenario s = coarse();
  s.final_time = s.initial_time;
  EXPECT_THROW(qp::initial_guess(s), qp::ValidationError);
  s = coarse();
  s.intervals = 1;
  EXPECT_THROW(qp::initial_guess(s), qp::ValidationError);
}

TEST(PerturbedGuess, SeededAndLeavesBoundaryValuesUntouched) {
  qp::Scenario s = coarse();
  s.seed = 42;
  const qp::Trajectory base = qp::initial_guess(s);
  const qp::Trajectory a = qp::perturbed_guess(base, s, 1);
  const qp::Trajectory b = qp::perturbed_guess(base, s, 1);
  const qp::Trajectory c = qp::perturbed_guess(base, s, 2);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.controls, b.controls);
  EXPECT_NE(a.states, c.states);
  EXPECT_EQ(a.states.front(), base.states.front());
  EXPECT_EQ(a.states.back(), base.states.back());
  for (std::size_t k = 1; k + 1 < base.states.size(); ++k) {
    EXPECT_LE(std::abs(a.states[k].h - base.states[k].h),
              s.perturbation * std::abs(base.states[k].h) + 1e-9);
  }
}

TEST(StartSet, WarmStartsComeFirstThenGuessThenPerturbations) {
  qp::Scenario s = coarse();
  s.starts = 3;
  qp::Trajectory warm = qp::initial_guess(s);
  warm.states[5].h += 10.0;
  const auto set = qp::start_set(s, {warm});
  ASSERT_EQ(set.size(), 4u);
  EXPECT_EQ(set[0].states, warm.states);
  EXPECT_EQ(set[1].states, qp::initial_guess(s).states);
}

TEST(FuelComparison, BothNormalisations) {
  const auto c = qp::compare_consumption(110.0, 100.0);
  EXPECT_DOUBLE_EQ(c.over_reference, 10.0);
  EXPECT_DOUBLE_EQ(c.over_trajectory, 100.0 * 10.0 / 110.0);
  EXPECT_THROW(qp::compare_consumption(0.0, 100.0), qp::ValidationError);
}

TEST(ThrottleBoundFraction, CountsIntervalsAtEitherBound) {
  qp::Trajectory t;
  const qp::PathBounds pb;
  t.controls = {{0.0, pb.delta_x.lower, 0.0},
                {0.0, pb.delta_x.upper, 0.0},
                {0.0, 0.5, 0.0},
                {0.0, pb.delta_x.lower + 5e-4, 0.0}};
  EXPECT_DOUBLE_EQ(qp::throttle_bound_fraction(t, pb), 0.75);
  EXPECT_DOUBLE_EQ(qp::throttle_bound_fraction(qp::Trajectory{}, pb), 0.0);
}

TEST(Builders, RejectMissingInputs) {
  qp::Scenario s = coarse();
  qp::VariantResult no_reference;
  EXPECT_THROW(qp::build_fuel_capped_ocp(s, no_reference), qp::ValidationError);
  s.observers.clear();
  s.variant = qp::Variant::fuel;
  EXPECT_THROW(qp::build_minimax_ocp(s), qp::ValidationError);
  EXPECT_NO_THROW(qp::build_fuel_ocp(s));
  EXPECT_THROW(qp::solve_from_starts(*qp::build_fuel_ocp(s), {}, {}, qp::Variant::fuel),
               qp::ValidationError);
}

TEST(Builders, ObjectiveAtGuessIsLeqOfGuess) {
  const qp::Scenario s = coarse();
  const auto p = qp::build_noise_ocp(s);
  const qp::Trajectory t = qp::initial_guess(s);
  const double want = qp::observer_levels(s, t)[0];
  EXPECT_NEAR(p->objective(p->pack(t)), want, 1e-12 * want);
}

// Coarse-grid solves shared by the variant tests.
class CoarseSolves : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scenario_ = coarse();
    reference_ = std::make_unique<qp::VariantResult>(qp::solve_fuel_reference(scenario_));
    noise_ = std::make_unique<qp::VariantResult>(
        qp::solve_noise(scenario_, {}, reference_.get()));
  }
  static void TearDownTestSuite() {
    reference_.reset();
    noise_.reset();
  }

  static qp::Scenario scenario_;
  static std::unique_ptr<qp::VariantResult> reference_;
  static std::unique_ptr<qp::VariantResult> noise_;
};

qp::Scenario CoarseSolves::scenario_;
std::unique_ptr<qp::VariantResult> CoarseSolves::reference_;
std::unique_ptr<qp::VariantResult> CoarseSolves::noise_;

TEST_F(CoarseSolves, FuelReferenceIsOptimalAndFeasible) {
  ASSERT_TRUE(reference_->optimal()) << reference_->report.message;
  EXPECT_LE(reference_->report.feasibility_error, 1e-6);
  EXPECT_GT(reference_->consumption, 0.0);
  EXPECT_NEAR(reference_->report.objective, reference_->consumption,
              1e-9 * reference_->consumption);
  EXPECT_EQ(reference_->variant, qp::Variant::fuel);
}

TEST_F(CoarseSolves, NoiseOptimumBeatsReferenceAndGuess) {
  ASSERT_TRUE(noise_->optimal()) << noise_->report.message;
  EXPECT_LE(noise_->leq[0], reference_->leq[0] + 1e-6);
  EXPECT_LT(noise_->leq[0], qp::observer_levels(scenario_, qp::initial_guess(scenario_))[0]);
  EXPECT_NEAR(noise_->report.objective, noise_->leq[0], 1e-9);
}

TEST_F(CoarseSolves, UnboundedFuelCapReproducesNoiseOptimum) {
  qp::Scenario s = scenario_;
  s.fuel_cap_factor = std::numeric_limits<double>::infinity();
  const auto p = qp::build_fuel_capped_ocp(s, *reference_);
  EXPECT_EQ(p->num_inequalities(), 0);
  const qp::VariantResult r =
      qp::solve_from_starts(*p, {noise_->trajectory}, {}, qp::Variant::noise_fuel_capped);
  ASSERT_TRUE(r.optimal()) << r.report.message;
  EXPECT_NEAR(r.leq[0], noise_->leq[0], 1e-6);
}

TEST_F(CoarseSolves, UnitFuelCapHoldsConsumptionAtReference) {
  qp::Scenario s = scenario_;
  s.fuel_cap_factor = 1.0;
  const qp::VariantResult r = qp::solve_fuel_capped(s, *reference_, {}, noise_.get());
  ASSERT_TRUE(r.optimal()) << r.report.message;
  EXPECT_LE(r.consumption,
            reference_->consumption * (1.0 + qp::kMinFuelCapMargin) + 1e-6);
  // Sandwiched between the free noise optimum and the fuel reference.
  EXPECT_GE(r.leq[0], noise_->leq[0] - 1e-6);
  EXPECT_LE(r.leq[0], reference_->leq[0] + 1e-6);
}

TEST(FuelCap, FloorOnlyAffectsCapsAtTheReference) {
  EXPECT_DOUBLE_EQ(qp::fuel_cap_for(1.1, 80.0), 88.0);
  EXPECT_DOUBLE_EQ(qp::fuel_cap_for(1.0, 80.0), 80.0 * (1.0 + qp::kMinFuelCapMargin));
  EXPECT_DOUBLE_EQ(qp::fuel_cap_for(0.5, 80.0), 80.0 * (1.0 + qp::kMinFuelCapMargin));
}

TEST_F(CoarseSolves, FuelCapSweepIsMonotone) {
  double previous = reference_->leq[0] + 1e-6;
  for (double factor : {1.0, 1.01, 1.05}) {
    qp::Scenario s = scenario_;
    s.fuel_cap_factor = factor;
    const qp::VariantResult r = qp::solve_fuel_capped(s, *reference_, {}, noise_.get());
    ASSERT_TRUE(r.optimal()) << "factor " << factor << ": " << r.report.message;
    EXPECT_LE(r.consumption, qp::fuel_cap_for(factor, reference_->consumption) + 1e-6);
    EXPECT_LE(r.leq[0], previous + 1e-6) << "factor " << factor;
    EXPECT_GE(r.leq[0], noise_->leq[0] - 1e-6) << "factor " << factor;
    previous = r.leq[0];
  }
}

TEST_F(CoarseSolves, SingleObserverMinimaxCollapsesToNoiseOptimum) {
  // Each problem's optimum is a stationary point of the other: the epigraph
  // variable sits on the single level.
  const auto minimax = qp::build_minimax_ocp(scenario_);
  const qp::VariantResult from_noise =
      qp::solve_from_starts(*minimax, {noise_->trajectory}, {}, qp::Variant::minimax);
  ASSERT_TRUE(from_noise.optimal()) << from_noise.report.message;
  EXPECT_NEAR(*from_noise.theta, noise_->leq[0], 1e-6);

  const qp::VariantResult own = qp::solve_minimax(scenario_, {}, reference_.get());
  ASSERT_TRUE(own.optimal()) << own.report.message;
  EXPECT_NEAR(*own.theta, own.leq[0], 1e-6);
  const auto noise = qp::build_noise_ocp(scenario_);
  const qp::VariantResult back =
      qp::solve_from_starts(*noise, {own.trajectory}, {}, qp::Variant::noise);
  ASSERT_TRUE(back.optimal()) << back.report.message;
  EXPECT_NEAR(back.leq[0], *own.theta, 1e-6);
}

TEST_F(CoarseSolves, MinimaxLevelBoundsEveryObserver) {
  qp::Scenario s = scenario_;
  s.observers = {{0.0, 0.0}, {30000.0, 5000.0}, {60000.0, 0.0}};
  const qp::VariantResult r = qp::solve_minimax(s, {}, reference_.get());
  ASSERT_TRUE(r.optimal()) << r.report.message;
  for (double l : r.leq) EXPECT_LE(l, *r.theta + 1e-6);
  EXPECT_NEAR(r.worst_leq(), *r.theta, 1e-6);
  // More observers cannot lower the worst level.
  EXPECT_GE(*r.theta, noise_->leq[0] - 1e-6);
}

TEST_F(CoarseSolves, DriverLogsEachStartAndItsInternodeCheck) {
  std::ostringstream log;
  qp::SolverOptions o;
  o.log = &log;
  const auto p = qp::build_noise_ocp(scenario_);
  const qp::VariantResult r =
      qp::solve_from_starts(*p, {noise_->trajectory}, o, qp::Variant::noise);
  const std::string text = log.str();
  EXPECT_NE(text.find("# noise start 0 of 1"), std::string::npos);
  EXPECT_NE(text.find("internode_violation="), std::string::npos);
  EXPECT_GE(r.internode.max_violation, 0.0);
}

TEST_F(CoarseSolves, RepeatedSolveIsBitIdentical) {
  const qp::VariantResult again = qp::solve_fuel_reference(scenario_);
  EXPECT_EQ(again.x, reference_->x);
  EXPECT_EQ(again.report.iterations, reference_->report.iterations);
}

}  // namespace

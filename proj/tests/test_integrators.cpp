#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hamassim/error.hpp"
#include "hamassim/integrators.hpp"
#include "support.hpp"

using namespace hamassim;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

const SystemSpec kOsc = MassSpring{};
const Field kOscField = [](const Vector& x) { return systems::vector_field(kOsc, x); };

double global_error(const StepperSpec& stepper, double t_end) {
  const int n = static_cast<int>(std::lround(t_end / stepper.dt));
  const Vector x0 = vec({1, 0});
  const Trajectory t = integrators::propagate(stepper, kOsc, x0, n);
  return (t.last() - testkit::oscillator_flow(MassSpring{}, x0, n * stepper.dt)).norm();
}

double fitted_slope(const std::vector<double>& dts, const std::vector<double>& errs) {
  const std::size_t n = dts.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(dts[i]) / n;
    my += std::log(errs[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(dts[i]) - mx) * (std::log(errs[i]) - my);
    sxx += (std::log(dts[i]) - mx) * (std::log(dts[i]) - mx);
  }
  return sxy / sxx;
}

template <class Make>
double order_of(Make make, const std::vector<double>& dts) {
  std::vector<double> errs;
  for (double dt : dts) errs.push_back(global_error(make(dt), 1.0));
  return fitted_slope(dts, errs);
}

}  // namespace

TEST(Rk4, ZeroField) {
  const Field zero = [](const Vector& x) { return Vector::Zero(x.size()); };
  EXPECT_EQ(integrators::rk4_step(zero, vec({1, 2}), 0.1), vec({1, 2}));
}

TEST(Rk4, ExponentialTaylorValue) {
  const Field f = [](const Vector& x) { return x; };
  EXPECT_NEAR(integrators::rk4_step(f, vec({1}), 0.1)[0], 1.1051708333, 1e-10);
  const double h = 0.1;
  EXPECT_DOUBLE_EQ(integrators::rk4_step(f, vec({1}), h)[0], 1 + h + h * h / 2 + h * h * h / 6 + h * h * h * h / 24);
}

TEST(Rk4, OscillatorMatchesAnalytic) {
  const Trajectory t = integrators::propagate(StepperSpec::rk4(0.01), kOsc, vec({1, 0}), 1000);
  const double w = std::sqrt(5.0);
  EXPECT_NEAR(t.last()[0], std::cos(w * 10.0), 1e-6);
  EXPECT_NEAR(t.last()[1], -w * std::sin(w * 10.0), 1e-6);
}

TEST(Rk4, NonFiniteStage) {
  const Field bad = [](const Vector& x) { return Vector::Constant(x.size(), std::nan("")); };
  try {
    integrators::rk4_step(bad, vec({1}), 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteState);
  }
}

TEST(Rk4, EmpiricalOrder) {
  EXPECT_NEAR(order_of([](double dt) { return StepperSpec::rk4(dt); }, {4e-2, 2e-2, 1e-2, 5e-3}), 4.0, 0.2);
}

TEST(Gl4, ZeroFieldOneIteration) {
  const Field zero = [](const Vector& x) { return Vector::Zero(x.size()); };
  int iters = 0;
  EXPECT_EQ(integrators::gl4_step(zero, vec({1, 2}), 0.1, {}, &iters), vec({1, 2}));
  EXPECT_EQ(iters, 1);
}

TEST(Gl4, PadeStabilityFunction) {
  const Field f = [](const Vector& x) { return x; };
  const double z = 0.1;
  const double pade = (1 + z / 2 + z * z / 12) / (1 - z / 2 + z * z / 12);
  EXPECT_NEAR(pade, 1.1051709027, 1e-10);  // 1261/1141
  EXPECT_NEAR(integrators::gl4_step(f, vec({1}), z)[0], pade, 1e-14);
}

TEST(Gl4, EnergyPreservedOverLongRun) {
  const Trajectory t = integrators::propagate(StepperSpec::gl4(0.01), kOsc, vec({1, 0}), 100000);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < t.size(); k += 100) {
    worst = std::max(worst, std::abs(systems::hamiltonian(kOsc, t.state(k)) - 2.5) / 2.5);
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Gl4, EmpiricalOrder) {
  EXPECT_NEAR(order_of([](double dt) { return StepperSpec::gl4(dt); }, {8e-2, 4e-2, 2e-2, 1e-2}), 4.0, 0.2);
}

TEST(Gl4, DivergesWhenContractionFails) {
  const Field stiff = [](const Vector& x) { return -1e4 * x; };
  try {
    integrators::gl4_step(stiff, vec({1}), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FixedPointDiverged);
  }
}

TEST(Composition, CoefficientSums) {
  for (auto coeffs : {integrators::kahan_li8_coefficients(), integrators::yoshida4_coefficients(),
                      integrators::yoshida6_coefficients()}) {
    EXPECT_NEAR(std::accumulate(coeffs.begin(), coeffs.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < coeffs.size(); ++i) EXPECT_EQ(coeffs[i], coeffs[coeffs.size() - 1 - i]);
  }
  EXPECT_EQ(integrators::kahan_li8_coefficients().size(), 17u);
}

TEST(Composition, LeapfrogEnergyBounded) {
  const Trajectory t = integrators::propagate(StepperSpec::leapfrog(0.01), kOsc, vec({1, 0}), 10000);
  double first = 0.0, second = 0.0;
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    const double e = std::abs(systems::hamiltonian(kOsc, t.state(k)) - 2.5);
    (k < t.size() / 2 ? first : second) = std::max(k < t.size() / 2 ? first : second, e);
  }
  EXPECT_LE(second, 1e-3);
  EXPECT_LE(second, 1.01 * first);
}

TEST(Composition, TimeReversible) {
  const Vector x = vec({0.3, -0.4});
  for (auto coeffs : {integrators::kahan_li8_coefficients(), integrators::yoshida6_coefficients()}) {
    const Vector y = integrators::symplectic_composition_step(kOsc, x, 0.05, coeffs);
    const Vector back = integrators::symplectic_composition_step(kOsc, y, -0.05, coeffs);
    EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-12);
  }
  const SystemSpec orbit = TwoBodyJ2{};
  const Vector xo = systems::orbit_state_from_elements(orbit.orbit(), 12000.0, 0.4, 1.0, 0.2, 0.3, 0.4);
  const Vector yo = integrators::symplectic_composition_step(orbit, xo, 60.0, integrators::kahan_li8_coefficients());
  const Vector bo = integrators::symplectic_composition_step(orbit, yo, -60.0, integrators::kahan_li8_coefficients());
  EXPECT_LE((bo - xo).cwiseAbs().maxCoeff(), 1e-12 * xo.cwiseAbs().maxCoeff());
}

TEST(Composition, ReversedCoefficientsInvert) {
  // A non-symmetric composition: its adjoint uses the reversed sequence.
  const std::vector<double> c{0.2, 0.5, 0.3};
  const std::vector<double> rc{0.3, 0.5, 0.2};
  const Vector x = vec({0.9, 0.1});
  const Vector y = integrators::symplectic_composition_step(kOsc, x, 0.02, c);
  const Vector back = integrators::symplectic_composition_step(kOsc, y, -0.02, rc);
  EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Composition, LeapfrogOrderTwo) {
  EXPECT_NEAR(order_of([](double dt) { return StepperSpec::leapfrog(dt); }, {4e-3, 2e-3, 1e-3}), 2.0, 0.3);
}

TEST(Composition, KahanLiOrderEight) {
  // At dt <= 4e-3 the order-8 error is below double roundoff; the slope is
  // measured where the truncation error dominates.
  const double p = order_of([](double dt) { return StepperSpec::kahan_li8(dt); }, {0.2, 0.1, 0.05});
  EXPECT_NEAR(p, 8.0, 0.3);
}

TEST(Composition, YoshidaOrders) {
  auto order = [](std::span<const double> c, std::vector<double> dts) {
    std::vector<double> errs;
    for (double dt : dts) {
      StepperSpec s = StepperSpec::leapfrog(dt);
      s.coefficients.assign(c.begin(), c.end());
      errs.push_back(global_error(s, 1.0));
    }
    return fitted_slope(dts, errs);
  };
  EXPECT_NEAR(order(integrators::yoshida4_coefficients(), {4e-2, 2e-2, 1e-2}), 4.0, 0.3);
  EXPECT_NEAR(order(integrators::yoshida6_coefficients(), {0.1, 0.05, 0.025}), 6.0, 0.3);
}

TEST(Propagate, SampleCountsAndGrid) {
  const Trajectory t = integrators::propagate(StepperSpec::gl4(0.01), kOsc, vec({1, 0}), 1000);
  EXPECT_EQ(t.size(), 1001);
  EXPECT_NEAR(t.times.back(), 10.0, 1e-12);
  const Trajectory one = integrators::propagate(StepperSpec::rk4(0.1), kOsc, vec({1, 0}), 1);
  EXPECT_EQ(one.size(), 2);
  EXPECT_EQ(one.state(1), integrators::rk4_step(kOscField, vec({1, 0}), 0.1));
}

TEST(Propagate, ContinuationIsBitIdentical) {
  for (const StepperSpec& s : {StepperSpec::rk4(0.01), StepperSpec::gl4(0.01), StepperSpec::kahan_li8(0.01)}) {
    const Trajectory full = integrators::propagate(s, kOsc, vec({1, 0}), 50);
    const Trajectory a = integrators::propagate(s, kOsc, vec({1, 0}), 20);
    const Trajectory b = integrators::propagate(s, kOsc, a.last(), 30);
    EXPECT_EQ(full.last(), b.last());
    EXPECT_EQ(full.state(20), a.last());
  }
}

TEST(Propagate, FieldOverloadRejectsComposition) {
  EXPECT_THROW(integrators::propagate(StepperSpec::leapfrog(0.01), kOscField, vec({1, 0}), 5), Error);
  EXPECT_NO_THROW(integrators::propagate(StepperSpec::rk4(0.01), kOscField, vec({1, 0}), 5));
}

TEST(Propagate, ReportsFailingStep) {
  int calls = 0;
  const Field f = [&](const Vector& x) {
    ++calls;
    return calls > 10 ? Vector::Constant(x.size(), std::nan("")) : Vector(Vector::Zero(x.size()));
  };
  try {
    integrators::propagate(StepperSpec::rk4(0.1), f, vec({1}), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteState);
    EXPECT_NE(std::string(e.what()).find("step 3"), std::string::npos) << e.what();
  }
}

TEST(StepperSpec, Validation) {
  EXPECT_THROW(StepperSpec::rk4(0.0).validate(), Error);
  StepperSpec bad = StepperSpec::leapfrog(0.1);
  bad.coefficients = {0.5, 0.4};
  EXPECT_THROW(bad.validate(), Error);
  StepperSpec gl = StepperSpec::gl4(0.1);
  gl.gl4_options.fp_tol = 0.0;
  EXPECT_THROW(gl.validate(), Error);
  EXPECT_NO_THROW(StepperSpec::kahan_li8(60.0, 6).validate());
}

TEST(Orbit, CompositionConservesEnergy) {
  const SystemSpec orbit = TwoBodyJ2{};
  const Vector x0 = systems::orbit_state_from_elements(orbit.orbit(), 23060.0, 0.7, 1.1, 0.5, 0.2, 0.1);
  const double period = systems::orbital_period(orbit.orbit(), 23060.0);
  const int n = static_cast<int>(std::lround(period / 60.0));
  const Trajectory t = integrators::propagate(StepperSpec::kahan_li8(60.0, 6), orbit, x0, n);
  const double h0 = systems::hamiltonian(orbit, x0);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    worst = std::max(worst, std::abs(systems::hamiltonian(orbit, t.state(k)) - h0) / std::abs(h0));
  }
  EXPECT_LE(worst, 1e-8);
}

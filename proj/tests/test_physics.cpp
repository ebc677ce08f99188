#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "chsep/physics.hpp"

using namespace chsep;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

}  // namespace

TEST(Potential, NormalizationAtZero) {
  const PotentialParams p{1.3, 4.0};
  EXPECT_EQ(convex_potential(p, 0.0, 0), 0.0);
  EXPECT_EQ(convex_potential(p, 0.0, 1), 0.0);
  EXPECT_EQ(potential_eval(p, 0.0, 0), 0.0);
}

TEST(Potential, PurePhaseLimit) {
  const PotentialParams p{0.7, 2.0};
  EXPECT_NEAR(convex_potential_at_pure_phase(p), 0.7 * std::log(2.0), 1e-15);
  EXPECT_NEAR(convex_potential(p, 1.0 - 1e-12, 0), 0.7 * std::log(2.0), 1e-9);
  EXPECT_NEAR(convex_potential(p, -1.0 + 1e-12, 0), 0.7 * std::log(2.0), 1e-9);
}

TEST(Potential, ValueAtOneHalf) {
  // 0.5 (1.5 ln 1.5 + 0.5 ln 0.5), evaluated in long double.
  const long double ref = 0.5L * (1.5L * std::log(1.5L) + 0.5L * std::log(0.5L));
  const PotentialParams p{1.0, 4.0};
  EXPECT_NEAR(convex_potential(p, 0.5, 0), static_cast<double>(ref), 1e-15);
  EXPECT_NEAR(convex_potential(p, 0.5, 0), 0.13081, 1e-5);
  EXPECT_NEAR(potential_eval(p, 0.5, 0), static_cast<double>(ref) - 0.5, 1e-15);
  EXPECT_NEAR(potential_eval(p, 0.5, 1), std::atanh(0.5) - 2.0, 1e-15);
  EXPECT_NEAR(potential_eval(p, 0.5, 2), 1.0 / 0.75 - 4.0, 1e-14);
}

TEST(Potential, DerivativeConsistencyByFiniteDifferences) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> d(-0.99, 0.99);
  const PotentialParams p{1.0, 3.0};
  for (int k = 0; k < 100; ++k) {
    const double s = d(gen);
    const double h = 1e-5 * (1.0 - std::abs(s));
    for (int order = 0; order < 2; ++order) {
      const double fd = (potential_eval(p, s + h, order) - potential_eval(p, s - h, order)) / (2 * h);
      const double exact = potential_eval(p, s, order + 1);
      EXPECT_LE(std::abs(fd - exact), 1e-6 * std::max(1.0, std::abs(exact))) << "s=" << s << " order=" << order;
    }
  }
}

TEST(Potential, ConvexPartIsUniformlyConvexAndOdd) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> d(-1.0 + 1e-9, 1.0 - 1e-9);
  const PotentialParams p{0.8, 3.0};
  for (int k = 0; k < 1000; ++k) {
    const double s = d(gen);
    EXPECT_GE(convex_potential(p, s, 2), p.theta);
    EXPECT_NEAR(convex_potential(p, -s, 1), -convex_potential(p, s, 1),
                1e-12 * std::max(1.0, std::abs(convex_potential(p, s, 1))));
  }
}

TEST(Potential, OutOfDomainIsAnError) {
  const PotentialParams p;
  EXPECT_EQ(kind_of([&] { potential_eval(p, 1.0, 0); }), ErrorKind::OutOfDomain);
  EXPECT_EQ(kind_of([&] { potential_eval(p, -1.0 + 1e-13, 1); }), ErrorKind::OutOfDomain);
  EXPECT_NO_THROW(potential_eval(p, 1.0 - 1e-12, 2));
}

TEST(Potential, ParameterValidation) {
  EXPECT_EQ(kind_of([] { PotentialParams{4.0, 4.0}.validate(); }), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of([] { PotentialParams{0.0, 4.0}.validate(); }), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of([] { PotentialParams{1.0, 4.0, 1e-6}.validate(); }), ErrorKind::ValidationError);
  EXPECT_NO_THROW((PotentialParams{1.0, 4.0}.validate()));
}

TEST(Potential, BinodalSolvesTheWellCondition) {
  const PotentialParams p{1.0, 4.0};
  const double b = p.binodal();
  EXPECT_NEAR(potential_eval(p, b, 1), 0.0, 1e-9);
  EXPECT_GT(b, 0.999);
}

TEST(Mobility, ConstantLaw) {
  const auto m = MobilitySpec::constant(1.0);
  for (double s : {-1.0, -0.3, 0.0, 1.0}) EXPECT_EQ(mobility_eval(m, s), 1.0);
}

TEST(Mobility, QuadraticBump) {
  const auto m = MobilitySpec::quadratic_bump(0.1, 1.0);
  EXPECT_DOUBLE_EQ(m(0.0), 1.0);
  EXPECT_DOUBLE_EQ(m(1.0), 0.1);
  EXPECT_DOUBLE_EQ(m(-1.0), 0.1);
  EXPECT_DOUBLE_EQ(m(0.5), 0.1 + 0.9 * 0.75);
}

TEST(Mobility, TableInterpolatesLinearly) {
  const auto m = MobilitySpec::table({{-1.0, 0.2}, {0.0, 1.0}, {1.0, 0.5}});
  EXPECT_DOUBLE_EQ(m(-0.5), 0.6);
  EXPECT_DOUBLE_EQ(m(0.5), 0.75);
  EXPECT_DOUBLE_EQ(m.m_star(), 0.2);
  EXPECT_DOUBLE_EQ(m.m_sup(), 1.0);
}

TEST(Mobility, BoundsHoldUnderDenseSampling) {
  for (const auto& m : {MobilitySpec::quadratic_bump(0.05, 2.0),
                        MobilitySpec::table({{-1.0, 0.3}, {-0.2, 0.9}, {0.4, 0.31}, {1.0, 0.7}})}) {
    for (int k = 0; k <= 10000; ++k) {
      const double v = m(-1.0 + 2.0 * k / 10000);
      EXPECT_GE(v, m.m_star());
      EXPECT_LE(v, m.m_sup());
    }
  }
}

TEST(Mobility, InvalidSpecs) {
  EXPECT_EQ(kind_of([] { MobilitySpec::quadratic_bump(0.0, 1.0); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([] { MobilitySpec::constant(-1.0); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([] { MobilitySpec::quadratic_bump(1.0, 0.5); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([] { MobilitySpec::table({{-1.0, 0.0}, {1.0, 1.0}}); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([] { MobilitySpec::table({{-0.5, 1.0}, {1.0, 1.0}}); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([] { MobilitySpec::constant(1.0)(1.5); }), ErrorKind::OutOfDomain);
}

TEST(Fluid, AffineDensityLaw) {
  const FluidParams fp{3.0, 1.0, 0.1, 0.4};
  EXPECT_EQ(fluid_eval(fp, 1.0).rho, 3.0);
  EXPECT_EQ(fluid_eval(fp, -1.0).rho, 1.0);
  EXPECT_EQ(fluid_eval(fp, 0.0).rho, 2.0);
  EXPECT_EQ(fp.rho_star(), 1.0);
  EXPECT_EQ(fp.rho_sup(), 3.0);
  const FluidParams matched{2.0, 2.0, 0.3, 0.3};
  for (double s : {-1.0, -0.2, 0.7, 1.0}) EXPECT_EQ(matched.rho(s), 2.0);
}

TEST(Fluid, ViscosityStaysInBounds) {
  const FluidParams fp{1.0, 1.0, 0.1, 0.4};
  for (double s : {-3.0, -1.0, 0.0, 0.5, 1.0, 2.0}) {
    const double nu = fluid_eval(fp, s).nu;
    EXPECT_GE(nu, 0.1);
    EXPECT_LE(nu, 0.4);
  }
  EXPECT_DOUBLE_EQ(fp.nu(0.0), 0.25);
  EXPECT_THROW((FluidParams{1.0, 1.0, 0.0, 1.0}.validate()), Error);
  EXPECT_THROW((FluidParams{-1.0, 1.0, 1.0, 1.0}.validate()), Error);
}

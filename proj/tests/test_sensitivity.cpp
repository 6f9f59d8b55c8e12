#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "nsum/sensitivity.hpp"

using namespace nsum;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Internal;
}

SimConfig cfg(double rho, double pf, double tau, std::uint64_t seed) {
    SimConfig c;
    c.n = 1500;
    c.rho = rho;
    c.p_frame = pf;
    c.tau = tau;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Decompose, RandomMixingFullFrame) {
    auto g = generate_population(cfg(1.0, 1.0, 1.0, 3));
    auto d = decompose(census_quantities(g));
    EXPECT_DOUBLE_EQ(d.phi, 1.0);
    EXPECT_DOUBLE_EQ(d.tau, 1.0);
    EXPECT_NEAR(d.delta, 1.0, 0.1);
    EXPECT_DOUBLE_EQ(d.generalized_estimand, 45.0);
    EXPECT_NEAR(d.basic_estimand, d.generalized_estimand * d.delta, 1e-9);
}

TEST(Decompose, IdentityOnDegradedGraphs) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto g0 = generate_population(cfg(0.3 + 0.1 * double(s), 0.5, 1.0, s));
        auto g = apply_transmission_error(g0, 0.5, s + 100);
        auto c = census_quantities(g);
        auto d = decompose(c);
        EXPECT_NEAR(d.basic_estimand / (d.phi * d.delta * d.tau), d.generalized_estimand, 1e-12 * d.generalized_estimand);
        EXPECT_NEAR(d.tau, 0.5, 0.01);
        EXPECT_LT(d.basic_estimand, d.generalized_estimand);
    }
}

TEST(Adjust, NeutralScenarioIsIdentity) {
    SensitivityScenario s;
    EXPECT_EQ(adjust_generalized(123.0, s), 123.0);
    EXPECT_EQ(adjust_modified_basic(123.0, s), 123.0);
}

TEST(Adjust, EtaScalesLinearly) {
    SensitivityScenario s;
    s.eta = 0.8;
    EXPECT_DOUBLE_EQ(adjust_generalized(100.0, s), 80.0);
}

TEST(Adjust, GeneralizedFormula) {
    SensitivityScenario s;
    s.c1 = 1.2;
    s.c2 = 0.9;
    s.c3 = 1.1;
    s.eps_bar_F = 0.7;
    s.K_F2 = 0.25;
    s.K_H = -0.1;
    s.eta = 0.95;
    EXPECT_DOUBLE_EQ(adjust_generalized(10.0, s), 10.0 * 0.9 / (0.7 * 1.25) * (1.1 * 0.9 / 1.2) * 0.95);
}

TEST(Adjust, ModifiedBasicTableValues) {
    SensitivityScenario s;
    s.delta = 0.69;
    s.tau = 0.77;
    EXPECT_DOUBLE_EQ(modified_basic_multiplier(s), 1.0 / (0.69 * 0.77));
}

// K_F1 belongs to the probe responses (numerator of the degree estimate), K_F2
// to y_{i,H}; the estimate scales like (1+K_F2)/(1+K_F1) so the correction is
// the reciprocal.
TEST(Adjust, ModifiedBasicKIndexOrientation) {
    SensitivityScenario s;
    s.K_F1 = 0.5;
    s.K_F2 = 0.2;
    EXPECT_DOUBLE_EQ(modified_basic_multiplier(s), 1.5 / 1.2);
}

TEST(Adjust, InverseRoundTrip) {
    SensitivityScenario s;
    s.c1 = 1.3;
    s.c2 = 0.8;
    s.K_F1 = 0.1;
    s.K_F2 = -0.2;
    s.K_H = 0.4;
    s.eps_bar_F = 2.0;
    s.eta = 0.6;
    s.delta = 0.5;
    s.tau = 0.9;
    EXPECT_NEAR(unadjust_generalized(adjust_generalized(77.0, s), s), 77.0, 1e-12);
    EXPECT_NEAR(unadjust_modified_basic(adjust_modified_basic(77.0, s), s), 77.0, 1e-12);
}

TEST(Adjust, InvalidScenarios) {
    SensitivityScenario s;
    s.delta = 0;
    EXPECT_EQ(code_of([&] { adjust_modified_basic(1.0, s); }), ErrorCode::DegenerateDenominator);
    s = {};
    s.K_H = -1;
    EXPECT_EQ(code_of([&] { adjust_generalized(1.0, s); }), ErrorCode::InvalidArgument);
    s = {};
    s.eta = 1.2;
    EXPECT_EQ(code_of([&] { adjust_generalized(1.0, s); }), ErrorCode::InvalidArgument);
}

TEST(KIndex, ConstantEpsIsZero) {
    EXPECT_EQ(k_index({1, 5, 2, 8}, {2, 2, 2, 2}), 0.0);
}

TEST(KIndex, ProportionalEpsGivesProductOfCvs) {
    std::vector<double> v{1, 5, 2, 8};
    std::vector<double> e{0.5, 2.5, 1.0, 4.0};
    const double m = 4.0;
    double var = 0;
    for (double x : v) var += (x - m) * (x - m);
    var /= 4.0;
    const double cv = std::sqrt(var) / m;
    EXPECT_NEAR(k_index(v, e), cv * cv, 1e-14);
}

TEST(KIndex, DefinitionMatchesCovarianceForm) {
    std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
    std::vector<double> e{0.9, 1.2, 0.7, 1.1, 1.0, 0.6, 1.3, 0.8};
    const double n = 8;
    const double mv = std::accumulate(v.begin(), v.end(), 0.0) / n, me = std::accumulate(e.begin(), e.end(), 0.0) / n;
    double cov = 0;
    for (std::size_t i = 0; i < v.size(); ++i) cov += (v[i] - mv) * (e[i] - me);
    cov /= n;
    EXPECT_NEAR(k_index(v, e), cov / (mv * me), 1e-14);
    // scale of eps does not matter
    auto e3 = e;
    for (auto& x : e3) x *= 3.7;
    EXPECT_NEAR(k_index(v, e3), k_index(v, e), 1e-14);
}

TEST(KIndex, Errors) {
    EXPECT_EQ(code_of([] { k_index({1, 2}, {1}); }), ErrorCode::LengthMismatch);
    EXPECT_EQ(code_of([] { k_index({1, -1}, {1, 2}); }), ErrorCode::DegenerateDenominator);
}

TEST(Nonsampling, TableRows) {
    CValues c;
    c.c2 = 1.1;
    EXPECT_DOUBLE_EQ(nonsampling_multiplier("d_bar_FF", c), 1.1);
    CValues one;
    for (auto r : {"d_bar_FF", "d_bar_UF", "phi", "v_bar_HF", "delta", "tau", "generalized_n_h", "adjusted_n_h"})
        EXPECT_EQ(nonsampling_multiplier(r, one), 1.0) << r;
    EXPECT_EQ(code_of([&] { nonsampling_multiplier("nope", one); }), ErrorCode::InvalidArgument);
}

TEST(Nonsampling, SizeRows) {
    CValues c{2.0, 1.25, 0.8};
    EXPECT_DOUBLE_EQ(nonsampling_multiplier("generalized_n_h", c), 0.5);
    EXPECT_DOUBLE_EQ(nonsampling_multiplier("adjusted_n_h", c), 0.5);
    EXPECT_DOUBLE_EQ(nonsampling_multiplier("v_bar_HF", c), 0.5);
    EXPECT_DOUBLE_EQ(nonsampling_multiplier("phi", c), 1.6);
    EXPECT_EQ(code_of([] { nonsampling_multiplier("tau", CValues{0, 1, 1}); }), ErrorCode::InvalidArgument);
}

TEST(DoubleRatio, ZeroCvIsZero) {
    RatioBiasInputs in;
    EXPECT_EQ(double_ratio_bias(in), 0.0);
}

TEST(DoubleRatio, MissingCorrelationIsAnError) {
    RatioBiasInputs in;
    in.cv = {0.1, 0.1, 0.1, 0.1};
    EXPECT_EQ(code_of([&] { double_ratio_bias(in); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { in.set_cor(RatioVar::x0, RatioVar::y0, 1.5); }), ErrorCode::InvalidArgument);
}

TEST(DoubleRatio, GeneralTermSigns) {
    RatioBiasInputs in;
    in.cv = {0.1, 0.2, 0.3, 0.4};  // x0 x1 y0 y1
    using V = RatioVar;
    in.set_cor(V::x1, V::y0, 0.5);
    in.set_cor(V::x1, V::y1, 0.25);
    in.set_cor(V::y0, V::y1, -0.5);
    in.set_cor(V::x0, V::x1, 0.1);
    in.set_cor(V::y0, V::x0, 0.2);  // stored unordered
    in.set_cor(V::y1, V::x0, 0.3);
    const double want = 0.5 * 0.06 - 0.25 * 0.08 + 0.5 * 0.12 - 0.1 * 0.02 - 0.2 * 0.03 + 0.3 * 0.04 + 0.09 + 0.04;
    EXPECT_NEAR(double_ratio_bias(in), want, 1e-15);
}

TEST(DoubleRatio, CrossSampleTermsDrop) {
    RatioBiasInputs in;
    in.structure = RatioStructure::degree_ratio;  // x0/(y0 x1), x1 from the other sample
    in.cv = {0.1, 0.2, 0.3, 0.0};
    in.set_cor(RatioVar::x0, RatioVar::y0, 0.5);
    EXPECT_NEAR(double_ratio_bias(in), -0.5 * 0.03 + 0.09 + 0.04, 1e-15);
    in.structure = RatioStructure::frame_ratio;
    EXPECT_NEAR(double_ratio_bias(in), -0.5 * 0.03 + 0.09, 1e-15);
}

TEST(DoubleRatio, SrsInputsScaleWithKappa) {
    std::array<std::vector<double>, 4> pop{std::vector<double>{10, 12, 9, 11, 13, 10, 8, 12, 11, 10},
                                           std::vector<double>{20, 21, 19, 22, 20, 18, 21, 20, 19, 22},
                                           std::vector<double>{5, 6, 5, 5, 7, 6, 4, 6, 5, 5},
                                           std::vector<double>{30, 29, 31, 33, 30, 28, 30, 32, 29, 31}};
    const double b2 = double_ratio_bias(srs_ratio_bias_inputs(pop, 2));
    const double b5 = double_ratio_bias(srs_ratio_bias_inputs(pop, 5));
    const double k2 = 0.5 - 0.1, k5 = 0.2 - 0.1;
    EXPECT_NEAR(b2 / k2, b5 / k5, 1e-12);
    EXPECT_EQ(double_ratio_bias(srs_ratio_bias_inputs(pop, 10)), 0.0);
}

// Exact relative bias of xbar/ybar over every SRS of size 4 from 10 units.
TEST(DoubleRatio, SimpleRatioMatchesEnumeration) {
    std::vector<double> x{10, 12, 9, 11, 13, 10, 8, 12, 11, 10};
    std::vector<double> y{5, 6, 5, 5, 7, 6, 4, 6, 5, 5};
    const double R = std::accumulate(x.begin(), x.end(), 0.0) / std::accumulate(y.begin(), y.end(), 0.0);
    double sum = 0;
    int count = 0;
    for (int mask = 0; mask < 1024; ++mask) {
        if (__builtin_popcount(mask) != 4) continue;
        double sx = 0, sy = 0;
        for (int i = 0; i < 10; ++i)
            if (mask >> i & 1) {
                sx += x[std::size_t(i)];
                sy += y[std::size_t(i)];
            }
        sum += sx / sy;
        ++count;
    }
    EXPECT_EQ(count, 210);
    const double exact = sum / count / R - 1;
    const double approx = double_ratio_bias(srs_ratio_bias_inputs({x, {}, y, {}}, 4, RatioStructure::frame_ratio));
    EXPECT_GT(exact * approx, 0.0);
    EXPECT_LT(std::abs(approx - exact), 0.5 * std::abs(exact));
}

TEST(ScenarioJson, NeutralDefaultsAndRoundTrip) {
    auto s = scenario_from_json(nlohmann::json{{"c1", 1.5}, {"schema_version", 1}});
    EXPECT_EQ(s.c1, 1.5);
    EXPECT_EQ(s.c2, 1.0);
    EXPECT_EQ(s.K_H, 0.0);
    auto back = scenario_from_json(scenario_to_json(s));
    EXPECT_EQ(back.c1, 1.5);
    EXPECT_EQ(code_of([] { scenario_from_json(nlohmann::json{{"zz", 1}}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { scenario_from_json(nlohmann::json{{"c1", "x"}}); }), ErrorCode::InvalidArgument);
}

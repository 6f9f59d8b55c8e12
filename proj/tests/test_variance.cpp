#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nsum/variance.hpp"

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

const KnownPopulationRegistry reg{{{"a", 100, 100}, {"b", 50, 50}}, 1000, 1000};

// 3 strata with 3, 2, 4 PSUs and two rows per PSU
FrameSurvey stratified() {
    FrameSurvey s;
    s.group_ids = {"a", "b"};
    s.has_membership = {false, false};
    const int psus[] = {3, 2, 4};
    int id = 0;
    for (int h = 0; h < 3; ++h)
        for (int p = 0; p < psus[h]; ++p)
            for (int k = 0; k < 2; ++k, ++id) {
                FrameRow r;
                r.id = "r" + std::to_string(id);
                r.weight = 1000.0 / 18.0;
                r.stratum = "h" + std::to_string(h);
                r.psu = r.stratum + "p" + std::to_string(p);
                // PSU effects make the clustering matter
                r.y_hidden = (p * 3 + h + k) % 5;
                r.y_probe = {Count(10 + 4 * p + k), Count(4 + (id % 3))};
                r.member = {0, 0};
                s.rows.push_back(r);
            }
    s.design = s.derive_design();
    return s;
}

HiddenSurvey hidden_sample() {
    HiddenSurvey h;
    h.group_ids = {"a", "b"};
    const Count ys[][2] = {{5, 2}, {3, 3}, {8, 1}, {2, 2}, {6, 0}, {4, 4}, {7, 3}, {1, 1}};
    const Count vs[][2] = {{3, 1}, {2, 2}, {5, 1}, {1, 1}, {4, 0}, {2, 2}, {5, 2}, {1, 0}};
    for (int i = 0; i < 8; ++i) {
        HiddenRow r;
        r.id = "h" + std::to_string(i);
        r.rel_weight = 1.0 / (1 + i % 3);
        r.y = {ys[i][0], ys[i][1]};
        r.v = {vs[i][0], vs[i][1]};
        h.rows.push_back(r);
    }
    return h;
}

EstimatorFn basic_fn() {
    return [](const FrameSurvey& f, Weights wf, const HiddenSurvey*, Weights) {
        return basic_scaleup(f, reg, BasicVariant::classic, wf);
    };
}

EstimatorFn generalized_fn() {
    return [](const FrameSurvey& f, Weights wf, const HiddenSurvey* h, Weights wh) {
        return generalized_scaleup(f, *h, reg, wf, wh);
    };
}

}  // namespace

TEST(NormalQuantile, KnownValues) {
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-8);
    EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-12);
    EXPECT_NEAR(normal_quantile(0.995), 2.5758293035489, 1e-8);
    EXPECT_NEAR(normal_quantile(1e-6), -4.753424308822899, 1e-8);
    EXPECT_NEAR(normal_quantile(0.3), -normal_quantile(0.7), 1e-12);
    EXPECT_EQ(code_of([] { normal_quantile(1.0); }), ErrorCode::InvalidArgument);
}

TEST(Killworth, ZeroEstimateIsDegenerate) {
    auto k = killworth_interval(0, 1000, 5000);
    EXPECT_EQ(k.se, 0.0);
    EXPECT_EQ(k.low, 0.0);
    EXPECT_EQ(k.high, 0.0);
}

TEST(Killworth, SymmetricAndSqrtScaling) {
    auto k = killworth_interval(150, 20000, 5000);
    EXPECT_DOUBLE_EQ(k.se, std::sqrt(5000.0 * 150 / 20000));
    EXPECT_NEAR(k.high - 150, 150 - k.low, 1e-12);
    EXPECT_NEAR((k.high - k.low) / 2, 1.959963984540054 * k.se, 1e-7);
    auto k2 = killworth_interval(300, 20000, 5000);
    EXPECT_NEAR(k2.se / k.se, std::sqrt(2.0), 1e-14);
    EXPECT_EQ(code_of([] { killworth_interval(1, 0, 5); }), ErrorCode::DegenerateDenominator);
}

TEST(Percentile, NearestRankOneToHundred) {
    std::vector<double> r;
    for (int i = 1; i <= 100; ++i) r.push_back(i);
    auto iv = percentile_interval(r, 0.95);
    EXPECT_EQ(iv.low, 3.0);
    EXPECT_EQ(iv.high, 98.0);
    std::reverse(r.begin(), r.end());
    EXPECT_EQ(percentile_interval(r, 0.95), iv);
}

TEST(Percentile, ConstantReplicatesGiveZeroWidth) {
    auto iv = percentile_interval(std::vector<double>(50, 7.5), 0.9);
    EXPECT_EQ(iv.low, 7.5);
    EXPECT_EQ(iv.high, 7.5);
}

TEST(Percentile, EndpointsAreReplicates) {
    std::vector<double> r;
    for (int i = 0; i < 37; ++i) r.push_back(std::sin(i * 1.3));
    auto iv = percentile_interval(r, 0.8);
    EXPECT_NE(std::find(r.begin(), r.end(), iv.low), r.end());
    EXPECT_NE(std::find(r.begin(), r.end(), iv.high), r.end());
    EXPECT_EQ(code_of([] { percentile_interval({1.0}, 0.95); }), ErrorCode::InsufficientReplicates);
}

TEST(Bootstrap, DeterministicAcrossThreads) {
    auto f = stratified();
    auto h = hidden_sample();
    IntervalSpec spec;
    spec.method = IntervalMethod::two_sample_boot;
    auto a = bootstrap_estimate(generalized_fn(), f, &h, spec, 300, 42, 1);
    auto b = bootstrap_estimate(generalized_fn(), f, &h, spec, 300, 42, 4);
    EXPECT_EQ(a.replicates, b.replicates);
    EXPECT_EQ(a.interval, b.interval);
    auto c = bootstrap_estimate(generalized_fn(), f, &h, spec, 300, 43, 1);
    EXPECT_NE(a.replicates, c.replicates);
}

TEST(Bootstrap, IntervalContainsPointEstimate) {
    auto f = stratified();
    for (auto m : {IntervalMethod::simple_boot, IntervalMethod::rescaled_boot}) {
        IntervalSpec spec;
        spec.method = m;
        auto e = bootstrap_estimate(basic_fn(), f, nullptr, spec, 1000, 5);
        ASSERT_TRUE(e.interval);
        EXPECT_LE(e.interval->low, e.value);
        EXPECT_GE(e.interval->high, e.value);
        EXPECT_EQ(e.replicates.size(), 1000u);
        EXPECT_EQ(e.metadata["seed"], 5);
    }
}

TEST(Bootstrap, RescaledWiderThanSimpleOnClusteredDesign) {
    auto f = stratified();
    IntervalSpec simple, rescaled;
    rescaled.method = IntervalMethod::rescaled_boot;
    auto sd = [](const std::vector<double>& x) {
        double m = 0, s = 0;
        for (double v : x) m += v;
        m /= double(x.size());
        for (double v : x) s += (v - m) * (v - m);
        return std::sqrt(s / double(x.size() - 1));
    };
    auto fn = [](const FrameSurvey& s, Weights w, const HiddenSurvey*, Weights) { return ht_total_reports_to_hidden(s, w); };
    auto a = bootstrap_estimate(fn, f, nullptr, simple, 4000, 9);
    auto b = bootstrap_estimate(fn, f, nullptr, rescaled, 4000, 9);
    EXPECT_GT(sd(b.replicates), sd(a.replicates));
}

TEST(Bootstrap, RdsHiddenResampler) {
    auto f = stratified();
    auto h = hidden_sample();
    IntervalSpec spec;
    spec.method = IntervalMethod::two_sample_boot;
    spec.hidden = HiddenResampler::rds;
    auto e = bootstrap_estimate(generalized_fn(), f, &h, spec, 200, 1);
    EXPECT_EQ(e.metadata["hidden_resampler"], "rds");
    EXPECT_EQ(e.replicates.size(), 200u);
}

TEST(Bootstrap, PrerequisitesAndErrors) {
    auto f = stratified();
    f.rows.resize(2);  // stratum h0 now has one PSU
    IntervalSpec spec;
    spec.method = IntervalMethod::rescaled_boot;
    EXPECT_EQ(code_of([&] { bootstrap_estimate(basic_fn(), f, nullptr, spec, 10, 1); }), ErrorCode::SingletonStratum);
    spec.method = IntervalMethod::two_sample_boot;
    EXPECT_EQ(code_of([&] { bootstrap_estimate(basic_fn(), stratified(), nullptr, spec, 10, 1); }),
              ErrorCode::InvalidArgument);
    spec.method = IntervalMethod::simple_boot;
    EXPECT_EQ(code_of([&] { bootstrap_estimate(basic_fn(), stratified(), nullptr, spec, 1, 1); }),
              ErrorCode::InsufficientReplicates);
}

// hidden sample with a single visible respondent: replicates that miss it are
// degenerate and excluded; with many of them the run fails.
TEST(Bootstrap, DegenerateReplicatesAreAudited) {
    auto f = stratified();
    HiddenSurvey h;
    h.group_ids = {"a", "b"};
    for (int i = 0; i < 300; ++i) {
        HiddenRow r;
        r.id = "h" + std::to_string(i);
        r.y = {3, 1};
        r.v = {i == 0 ? Count(2) : Count(0), 0};
        h.rows.push_back(r);
    }
    IntervalSpec spec;
    spec.method = IntervalMethod::two_sample_boot;
    EXPECT_EQ(code_of([&] { bootstrap_estimate(generalized_fn(), f, &h, spec, 200, 3); }),
              ErrorCode::TooManyDegenerateReplicates);

    // every row visible except a handful: replicates never degenerate
    for (int i = 0; i < 300; ++i) h.rows[std::size_t(i)].v = {i < 295 ? Count(1) : Count(0), 0};
    auto e = bootstrap_estimate(generalized_fn(), f, &h, spec, 200, 3);
    EXPECT_EQ(e.excluded_replicates, 0u);
    EXPECT_EQ(e.metadata["excluded_replicates"], 0);
}

TEST(Bootstrap, ExclusionBelowThresholdIsCounted) {
    auto f = stratified();
    HiddenSurvey h;
    h.group_ids = {"a", "b"};
    // 16 of 20 rows invisible: a replicate is degenerate with probability 0.8^20 ~ 0.0115
    for (int i = 0; i < 20; ++i) {
        HiddenRow r;
        r.id = "h" + std::to_string(i);
        r.y = {3, 1};
        r.v = {i < 4 ? Count(2) : Count(0), 0};
        h.rows.push_back(r);
    }
    IntervalSpec spec;
    spec.method = IntervalMethod::two_sample_boot;
    // find a seed whose exclusion count is between 1 and 1% of B
    bool seen = false;
    for (std::uint64_t seed = 0; seed < 40 && !seen; ++seed) {
        try {
            auto e = bootstrap_estimate(generalized_fn(), f, &h, spec, 200, seed);
            if (e.excluded_replicates > 0) {
                seen = true;
                EXPECT_LE(e.excluded_replicates, 2u);
                EXPECT_EQ(e.replicates.size() + e.excluded_replicates, 200u);
            }
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::TooManyDegenerateReplicates);
        }
    }
    EXPECT_TRUE(seen);
}

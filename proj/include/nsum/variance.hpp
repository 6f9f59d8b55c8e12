#pragma once
// Killworth interval, percentile intervals and the bootstrap driver.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nsum/data_model.hpp"
#include "nsum/estimators.hpp"
#include "nsum/parallel.hpp"
#include "nsum/sampling.hpp"

namespace nsum {

// Acklam's rational approximation polished by one Halley step on erfc;
// absolute error well under 1e-8 on (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0 && p < 1)) fail(ErrorCode::InvalidArgument, "quantile probability must be in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - plow) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

struct KillworthInterval {
    double se = 0, low = 0, high = 0, level = 0.95;
};

// se = sqrt(N * N_hat / sum d_hat)
inline KillworthInterval killworth_interval(double n_hat, double sum_degree_hat, double N, double level = 0.95) {
    if (!(level > 0 && level < 1)) fail(ErrorCode::InvalidArgument, "level must be in (0,1)");
    if (!(sum_degree_hat > 0)) fail(ErrorCode::DegenerateDenominator, "sum of estimated degrees must be positive");
    if (n_hat < 0) fail(ErrorCode::InvalidArgument, "negative size estimate");
    KillworthInterval k;
    k.level = level;
    k.se = std::sqrt(N * n_hat / sum_degree_hat);
    const double z = normal_quantile(1 - (1 - level) / 2);
    k.low = n_hat - z * k.se;
    k.high = n_hat + z * k.se;
    return k;
}

// nearest rank: the ceil(p*B)-th smallest, clamped to [1, B]
inline double nearest_rank(const std::vector<double>& sorted, double p) {
    const double B = double(sorted.size());
    auto r = std::size_t(std::ceil(p * B - 1e-12));
    r = std::clamp<std::size_t>(r, 1, sorted.size());
    return sorted[r - 1];
}

inline Interval percentile_interval(std::vector<double> replicates, double level = 0.95) {
    if (!(level > 0 && level < 1)) fail(ErrorCode::InvalidArgument, "level must be in (0,1)");
    if (replicates.size() < 2) fail(ErrorCode::InsufficientReplicates, "need at least two replicates");
    for (double x : replicates)
        if (!std::isfinite(x)) fail(ErrorCode::InvalidArgument, "non-finite replicate");
    std::sort(replicates.begin(), replicates.end());
    const double a = (1 - level) / 2;
    return {nearest_rank(replicates, a), nearest_rank(replicates, 1 - a), level};
}

enum class IntervalMethod { killworth, simple_boot, rescaled_boot, two_sample_boot };
enum class HiddenResampler { simple, rds };

inline const char* method_name(IntervalMethod m) {
    switch (m) {
        case IntervalMethod::killworth: return "killworth";
        case IntervalMethod::simple_boot: return "simple_boot";
        case IntervalMethod::rescaled_boot: return "rescaled_boot";
        case IntervalMethod::two_sample_boot: return "two_sample_boot";
    }
    return "?";
}

// simple_boot / rescaled_boot pick the frame resampler; two_sample_boot means
// rescaled frame replicates paired with hidden replicates and requires a hidden
// survey. Whenever a hidden survey is given it is resampled with `hidden`.
struct IntervalSpec {
    double level = 0.95;
    IntervalMethod method = IntervalMethod::simple_boot;
    HiddenResampler hidden = HiddenResampler::simple;
    ChainSource chain = ChainSource::marginal;
};

using EstimatorFn = std::function<double(const FrameSurvey&, Weights, const HiddenSurvey*, Weights)>;

inline Estimate bootstrap_estimate(const EstimatorFn& fn, const FrameSurvey& frame, const HiddenSurvey* hidden,
                                   const IntervalSpec& spec, std::size_t B, std::uint64_t seed, unsigned threads = 1) {
    if (spec.method == IntervalMethod::killworth) fail(ErrorCode::InvalidArgument, "killworth is not a bootstrap method");
    if (spec.method == IntervalMethod::two_sample_boot && !hidden)
        fail(ErrorCode::InvalidArgument, "two_sample_boot needs a hidden survey");
    if (B < 2) fail(ErrorCode::InsufficientReplicates, "need B >= 2");
    if (frame.rows.empty()) fail(ErrorCode::EmptySample, "frame survey has no rows");

    const bool rescaled = spec.method != IntervalMethod::simple_boot;
    PsuLayout layout;
    if (rescaled) {
        layout = psu_layout(frame);
        check_rescaled_prereqs(layout);
    }
    std::optional<RdsModel> rds;
    if (hidden && spec.hidden == HiddenResampler::rds) rds = rds_model(*hidden, spec.chain);

    Estimate est;
    est.value = fn(frame, {}, hidden, {});
    std::vector<double> vals(B, 0.0);
    std::vector<std::uint8_t> ok(B, 1);
    const std::size_t n = frame.rows.size();
    parallel_for(B, threads, [&](std::size_t b) {
        std::vector<double> wf;
        if (rescaled) {
            wf = rescaled_bootstrap_replicate(frame, layout, seed, b);
        } else {
            wf = multiplicities(simple_bootstrap_replicate(n, seed, b), n);
            for (std::size_t i = 0; i < n; ++i) wf[i] *= frame.rows[i].weight;
        }
        std::vector<double> wh;
        if (hidden) {
            const std::size_t m = hidden->rows.size();
            wh = multiplicities(rds ? rds_bootstrap_replicate(*rds, m, seed, b) : hidden_simple_bootstrap_replicate(m, seed, b), m);
            for (std::size_t i = 0; i < m; ++i) wh[i] *= hidden->rows[i].rel_weight;
        }
        try {
            vals[b] = fn(frame, wf, hidden, wh);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateVisibility && e.code() != ErrorCode::DegenerateDenominator) throw;
            ok[b] = 0;
        }
    });
    for (std::size_t b = 0; b < B; ++b) {
        if (ok[b])
            est.replicates.push_back(vals[b]);
        else
            ++est.excluded_replicates;
    }
    if (double(est.excluded_replicates) > 0.01 * double(B))
        fail(ErrorCode::TooManyDegenerateReplicates,
             std::to_string(est.excluded_replicates) + " of " + std::to_string(B) + " replicates were degenerate");
    est.interval = percentile_interval(est.replicates, spec.level);
    est.method = method_name(spec.method);
    est.metadata = {{"replicates_requested", B},
                    {"excluded_replicates", est.excluded_replicates},
                    {"seed", seed},
                    {"level", spec.level},
                    {"frame_resampler", rescaled ? "rescaled" : "simple"},
                    {"hidden_resampler", hidden ? (rds ? "rds" : "simple") : "none"}};
    return est;
}

}  // namespace nsum

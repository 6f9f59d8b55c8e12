#pragma once
// Decomposition of the basic estimand, nonsampling multipliers, imperfect
// weight corrections and the double-ratio bias approximation.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nsum/error.hpp"
#include "nsum/netsim.hpp"

namespace nsum {

struct Decomposition {
    double basic_estimand = 0;
    double phi = 0, delta = 0, tau = 0;
    double generalized_estimand = 0;
};

inline Decomposition decompose(const CensusQuantities& c) {
    Decomposition d{basic_estimand(c), c.phi, c.delta, c.tau, generalized_estimand(c)};
    const double back = d.basic_estimand / d.phi / d.delta / d.tau;
    if (std::abs(back - d.generalized_estimand) > 1e-12 * std::abs(d.generalized_estimand))
        fail(ErrorCode::Internal, "basic/(phi*delta*tau) does not reproduce the generalized estimand");
    return d;
}

// K_F1 indexes the probe responses y_{i,A}, K_F2 the hidden responses y_{i,H},
// K_H the hidden-sample visibilities.
struct SensitivityScenario {
    double c1 = 1, c2 = 1, c3 = 1;
    double eps_bar_F = 1;
    double K_F1 = 0, K_F2 = 0, K_H = 0;
    double eta = 1;
    double delta = 1, tau = 1;

    void validate() const {
        if (!(c1 > 0 && c2 > 0 && c3 > 0)) fail(ErrorCode::InvalidArgument, "c1, c2, c3 must be positive");
        if (!(eps_bar_F > 0)) fail(ErrorCode::InvalidArgument, "eps_bar_F must be positive");
        if (!(1 + K_F1 > 0 && 1 + K_F2 > 0 && 1 + K_H > 0)) fail(ErrorCode::InvalidArgument, "1+K must be positive");
        if (!(eta > 0 && eta <= 1)) fail(ErrorCode::InvalidArgument, "eta must be in (0,1]");
        if (!(delta > 0)) fail(ErrorCode::DegenerateDenominator, "delta must be positive");
        if (!(tau > 0 && tau <= 1)) fail(ErrorCode::DegenerateDenominator, "tau must be in (0,1]");
    }
};

inline const std::vector<std::string>& scenario_keys() {
    static const std::vector<std::string> k{"c1", "c2", "c3", "eps_bar_F", "K_F1", "K_F2", "K_H", "eta", "delta", "tau"};
    return k;
}

inline double& scenario_field(SensitivityScenario& s, const std::string& k) {
    if (k == "c1") return s.c1;
    if (k == "c2") return s.c2;
    if (k == "c3") return s.c3;
    if (k == "eps_bar_F") return s.eps_bar_F;
    if (k == "K_F1") return s.K_F1;
    if (k == "K_F2") return s.K_F2;
    if (k == "K_H") return s.K_H;
    if (k == "eta") return s.eta;
    if (k == "delta") return s.delta;
    if (k == "tau") return s.tau;
    fail(ErrorCode::InvalidArgument, "unknown scenario key " + k);
}

inline double generalized_multiplier(const SensitivityScenario& s) {
    s.validate();
    return (1 + s.K_H) / (s.eps_bar_F * (1 + s.K_F2)) * (s.c3 * s.c2 / s.c1) * s.eta;
}

inline double modified_basic_multiplier(const SensitivityScenario& s) {
    s.validate();
    return (1 + s.K_F1) / (1 + s.K_F2) * (s.c2 * s.c3 / s.c1) * s.eta / (s.delta * s.tau);
}

inline double adjust_generalized(double est, const SensitivityScenario& s) { return est * generalized_multiplier(s); }
inline double adjust_modified_basic(double est, const SensitivityScenario& s) { return est * modified_basic_multiplier(s); }
inline double unadjust_generalized(double est, const SensitivityScenario& s) { return est / generalized_multiplier(s); }
inline double unadjust_modified_basic(double est, const SensitivityScenario& s) {
    return est / modified_basic_multiplier(s);
}

// cor * cv(values) * cv(eps), population moments (denominator N)
inline double k_index(const std::vector<double>& values, const std::vector<double>& eps) {
    if (values.size() != eps.size()) fail(ErrorCode::LengthMismatch, "k_index inputs differ in length");
    if (values.size() < 2) fail(ErrorCode::InvalidArgument, "k_index needs at least two values");
    const double n = double(values.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ma += values[i];
        mb += eps[i];
    }
    ma /= n;
    mb /= n;
    if (ma == 0 || mb == 0) fail(ErrorCode::DegenerateDenominator, "zero mean, cv undefined");
    double va = 0, vb = 0, cab = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        va += (values[i] - ma) * (values[i] - ma);
        vb += (eps[i] - mb) * (eps[i] - mb);
        cab += (values[i] - ma) * (eps[i] - mb);
    }
    va /= n;
    vb /= n;
    cab /= n;
    if (va == 0 || vb == 0) return 0.0;
    const double cor = cab / std::sqrt(va * vb);
    return cor * (std::sqrt(va) / ma) * (std::sqrt(vb) / mb);
}

enum class NonsamplingRow { d_bar_FF, d_bar_UF, phi, v_bar_HF, delta, tau, generalized_n_h, adjusted_n_h };

inline std::optional<NonsamplingRow> nonsampling_row(const std::string& s) {
    static const std::map<std::string, NonsamplingRow> m{
        {"d_bar_FF", NonsamplingRow::d_bar_FF}, {"d_bar_UF", NonsamplingRow::d_bar_UF},
        {"phi", NonsamplingRow::phi},           {"v_bar_HF", NonsamplingRow::v_bar_HF},
        {"delta", NonsamplingRow::delta},       {"tau", NonsamplingRow::tau},
        {"generalized_n_h", NonsamplingRow::generalized_n_h}, {"adjusted_n_h", NonsamplingRow::adjusted_n_h}};
    auto it = m.find(s);
    if (it == m.end()) return std::nullopt;
    return it->second;
}

struct CValues {
    double c1 = 1, c2 = 1, c3 = 1;
};

// what the estimator is effectively consistent for, relative to its target
inline double nonsampling_multiplier(NonsamplingRow row, const CValues& c) {
    if (!(c.c1 > 0 && c.c2 > 0 && c.c3 > 0)) fail(ErrorCode::InvalidArgument, "c values must be positive");
    switch (row) {
        case NonsamplingRow::d_bar_FF:
        case NonsamplingRow::d_bar_UF: return c.c2 * c.c3 / c.c1;
        case NonsamplingRow::phi: return c.c1 / c.c2;
        case NonsamplingRow::v_bar_HF: return c.c3 * c.c2 / c.c1;
        case NonsamplingRow::delta:
        case NonsamplingRow::tau: return c.c1 / c.c2;
        case NonsamplingRow::generalized_n_h: return 1.0 / c.c1;
        case NonsamplingRow::adjusted_n_h: return 1.0 / (c.c1 * c.c2 * c.c3);
    }
    fail(ErrorCode::InvalidArgument, "unknown nonsampling row");
}

inline double nonsampling_multiplier(const std::string& row, const CValues& c) {
    auto r = nonsampling_row(row);
    if (!r) fail(ErrorCode::InvalidArgument, "unknown estimator row " + row);
    return nonsampling_multiplier(*r, c);
}

// ---- double-ratio bias: r = y1 * x0 / (x1 * y0) ----

enum class RatioVar { x0 = 0, x1 = 1, y0 = 2, y1 = 3 };

// Which of x0, x1, y0, y1 appear, and which sample each comes from.
enum class RatioStructure {
    general,                 // all four, one sample
    frame_ratio,             // x0/y0, frame sample
    visibility_mean,         // x0/y0, hidden sample
    degree_hidden_to_frame,  // x0/y0, hidden sample
    degree_ratio,            // x0/(y0 x1), x1 from the frame sample
    true_positive_rate,      // x0/(y0 x1), all hidden sample
    generalized_size,        // y1 x0/y0, y1 from the frame sample
};

struct RatioLayout {
    std::array<bool, 4> present{};
    std::array<int, 4> sample{};  // 0 frame, 1 hidden
};

inline RatioLayout ratio_layout(RatioStructure s) {
    using R = RatioStructure;
    switch (s) {
        case R::general: return {{true, true, true, true}, {0, 0, 0, 0}};
        case R::frame_ratio: return {{true, false, true, false}, {0, 0, 0, 0}};
        case R::visibility_mean:
        case R::degree_hidden_to_frame: return {{true, false, true, false}, {1, 1, 1, 1}};
        case R::degree_ratio: return {{true, true, true, false}, {1, 0, 1, 1}};
        case R::true_positive_rate: return {{true, true, true, false}, {1, 1, 1, 1}};
        case R::generalized_size: return {{true, false, true, true}, {1, 1, 1, 0}};
    }
    fail(ErrorCode::InvalidArgument, "unknown ratio structure");
}

struct RatioBiasInputs {
    std::array<double, 4> cv{};  // indexed by RatioVar
    std::map<std::pair<int, int>, double> cor;
    RatioStructure structure = RatioStructure::general;

    void set_cor(RatioVar a, RatioVar b, double r) {
        if (!(r >= -1 && r <= 1)) fail(ErrorCode::InvalidArgument, "correlation outside [-1,1]");
        int i = int(a), j = int(b);
        if (i > j) std::swap(i, j);
        cor[{i, j}] = r;
    }
    std::optional<double> get_cor(RatioVar a, RatioVar b) const {
        int i = int(a), j = int(b);
        if (i > j) std::swap(i, j);
        auto it = cor.find({i, j});
        if (it == cor.end()) return std::nullopt;
        return it->second;
    }
};

inline double double_ratio_bias(const RatioBiasInputs& in) {
    const auto L = ratio_layout(in.structure);
    for (double c : in.cv)
        if (!(c >= 0)) fail(ErrorCode::InvalidArgument, "cv must be nonnegative");
    auto C = [&](RatioVar a, RatioVar b) -> double {
        const int i = int(a), j = int(b);
        if (!L.present[i] || !L.present[j] || L.sample[i] != L.sample[j]) return 0.0;
        const double scale = in.cv[i] * in.cv[j];
        if (scale == 0) return 0.0;
        auto r = in.get_cor(a, b);
        if (!r) fail(ErrorCode::InvalidArgument, "missing required correlation");
        return *r * scale;
    };
    auto C2 = [&](RatioVar a) { return L.present[int(a)] ? in.cv[int(a)] * in.cv[int(a)] : 0.0; };
    using V = RatioVar;
    return C(V::x1, V::y0) - C(V::x1, V::y1) - C(V::y0, V::y1) - C(V::x0, V::x1) - C(V::x0, V::y0) +
           C(V::y1, V::x0) + C2(V::y0) + C2(V::x1);
}

// Inputs for estimators that are sample means under SRS without replacement:
// relative (co)variances are (1/n - 1/N) S_ab / (mean_a mean_b) with S using N-1.
// pop[v] empty means the variable is absent.
inline RatioBiasInputs srs_ratio_bias_inputs(const std::array<std::vector<double>, 4>& pop, std::size_t n,
                                             RatioStructure structure = RatioStructure::general) {
    std::size_t N = 0;
    for (const auto& p : pop)
        if (!p.empty()) {
            if (N && p.size() != N) fail(ErrorCode::LengthMismatch, "population columns differ in length");
            N = p.size();
        }
    if (N < 2 || n < 1 || n > N) fail(ErrorCode::InvalidArgument, "need 1 <= n <= N and N >= 2");
    const double kappa = 1.0 / double(n) - 1.0 / double(N);
    std::array<double, 4> mean{}, sd{};
    for (int v = 0; v < 4; ++v) {
        if (pop[v].empty()) continue;
        for (double x : pop[v]) mean[v] += x;
        mean[v] /= double(N);
        if (mean[v] == 0) fail(ErrorCode::DegenerateDenominator, "zero population mean");
        double ss = 0;
        for (double x : pop[v]) ss += (x - mean[v]) * (x - mean[v]);
        sd[v] = std::sqrt(ss / double(N - 1));
    }
    RatioBiasInputs in;
    in.structure = structure;
    for (int v = 0; v < 4; ++v) in.cv[v] = pop[v].empty() ? 0.0 : std::sqrt(kappa) * sd[v] / std::abs(mean[v]);
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            if (pop[a].empty() || pop[b].empty() || sd[a] == 0 || sd[b] == 0) continue;
            double s = 0;
            for (std::size_t i = 0; i < N; ++i) s += (pop[a][i] - mean[a]) * (pop[b][i] - mean[b]);
            s /= double(N - 1);
            // sign of the mean flips the sign of the relative covariance
            const double sign = (mean[a] > 0) == (mean[b] > 0) ? 1.0 : -1.0;
            in.set_cor(RatioVar(a), RatioVar(b), std::clamp(sign * s / (sd[a] * sd[b]), -1.0, 1.0));
        }
    return in;
}

inline nlohmann::json scenario_to_json(const SensitivityScenario& s) {
    nlohmann::json j{{"schema_version", 1}};
    SensitivityScenario t = s;
    for (const auto& k : scenario_keys()) j[k] = scenario_field(t, k);
    return j;
}

inline SensitivityScenario scenario_from_json(const nlohmann::json& j) {
    SensitivityScenario s;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "schema_version") continue;
        if (!it->is_number()) fail(ErrorCode::InvalidArgument, "scenario value for " + it.key() + " is not a number");
        scenario_field(s, it.key()) = it->get<double>();
    }
    return s;
}

}  // namespace nsum

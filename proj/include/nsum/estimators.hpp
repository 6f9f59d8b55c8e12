#pragma once
// Point estimators. Every estimator takes an optional weight override so that
// bootstrap replicates can reuse the original rows; an empty span means "use
// the survey's own weights".

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsum/data_model.hpp"

namespace nsum {

using Weights = std::span<const double>;

namespace detail {

inline double frame_w(const FrameSurvey& s, Weights w, std::size_t i) { return w.empty() ? s.rows[i].weight : w[i]; }
inline double hidden_w(const HiddenSurvey& h, Weights w, std::size_t i) { return w.empty() ? h.rows[i].rel_weight : w[i]; }

inline void check_frame(const FrameSurvey& s, Weights w) {
    if (s.rows.empty()) fail(ErrorCode::EmptySample, "frame survey has no rows");
    if (!w.empty() && w.size() != s.rows.size()) fail(ErrorCode::LengthMismatch, "frame weight override length");
}
inline void check_hidden(const HiddenSurvey& h, Weights w) {
    if (h.rows.empty()) fail(ErrorCode::EmptySample, "hidden survey has no rows");
    if (!w.empty() && w.size() != h.rows.size()) fail(ErrorCode::LengthMismatch, "hidden weight override length");
}

template <class Survey>
std::vector<std::size_t> columns_for(const Survey& s, const KnownPopulationRegistry& reg) {
    std::vector<std::size_t> cols;
    for (const auto& g : reg.groups) {
        auto j = s.column_of(g.id);
        if (!j) throw Error(ErrorCode::MissingColumn, g.id, "survey has no responses for this group");
        cols.push_back(*j);
    }
    return cols;
}

}  // namespace detail

// sum_i y_{i,H} w_i
inline double ht_total_reports_to_hidden(const FrameSurvey& s, Weights w = {}) {
    detail::check_frame(s, w);
    double t = 0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) t += double(s.rows[i].y_hidden) * detail::frame_w(s, w, i);
    return t;
}

// sum_i w_i sum_j y_{i,A_j}; groups are a multiset, repeats count twice
inline double ht_total_reports_to_probes(const FrameSurvey& s, const std::vector<std::string>& groups, Weights w = {}) {
    detail::check_frame(s, w);
    std::vector<std::size_t> cols;
    for (const auto& g : groups) {
        auto j = s.column_of(g);
        if (!j) throw Error(ErrorCode::MissingColumn, g, "survey has no responses for this group");
        cols.push_back(*j);
    }
    double t = 0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        Count y = 0;
        for (auto c : cols) y += s.rows[i].y_probe[c];
        t += double(y) * detail::frame_w(s, w, i);
    }
    return t;
}

inline std::vector<std::string> group_ids_of(const KnownPopulationRegistry& reg) {
    std::vector<std::string> ids;
    for (const auto& g : reg.groups) ids.push_back(g.id);
    return ids;
}

enum class DegreeTarget { FF, UF, FU };

// Known-population estimate: y_hat_{F,A} / N_A. FF and UF share the formula and
// differ only in which registry the caller supplies; FU rescales UF by N/N_F.
inline double kp_mean_degree(const FrameSurvey& s, const KnownPopulationRegistry& reg, DegreeTarget target,
                             Weights w = {}) {
    const Count na = reg.total_size();
    if (na <= 0) fail(ErrorCode::DegenerateDenominator, "registry total N_A is zero");
    const double d = ht_total_reports_to_probes(s, group_ids_of(reg), w) / double(na);
    if (target == DegreeTarget::FU) return d * double(reg.universe_size) / double(reg.frame_size);
    return d;
}

namespace detail {

// (N_F / N_{A∩F}) * Hajek mean of the selected per-row sums
template <class Field>
double hidden_hajek(const HiddenSurvey& h, const KnownPopulationRegistry& reg, Weights w, Field field) {
    check_hidden(h, w);
    const auto on = reg.on_frame_only();
    const Count naf = on.total_on_frame();
    if (on.groups.empty() || naf <= 0) fail(ErrorCode::DegenerateDenominator, "N_{A∩F} is zero");
    const auto cols = columns_for(h, on);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < h.rows.size(); ++i) {
        Count t = 0;
        for (auto c : cols) t += field(h.rows[i], c);
        const double wi = hidden_w(h, w, i);
        num += double(t) * wi;
        den += wi;
    }
    return double(reg.frame_size) / double(naf) * (num / den);
}

}  // namespace detail

inline double visibility_mean(const HiddenSurvey& h, const KnownPopulationRegistry& reg, Weights w = {}) {
    const double v = detail::hidden_hajek(h, reg, w, [](const HiddenRow& r, std::size_t c) { return r.v[c]; });
    if (v == 0) fail(ErrorCode::DegenerateVisibility, "estimated mean visibility is zero");
    return v;
}

inline double mean_degree_hidden_to_frame(const HiddenSurvey& h, const KnownPopulationRegistry& reg, Weights w = {}) {
    return detail::hidden_hajek(h, reg, w, [](const HiddenRow& r, std::size_t c) { return r.y[c]; });
}

// d_FF(reg1) / d_UF(reg2)
inline double frame_ratio(const FrameSurvey& s, const KnownPopulationRegistry& reg1, const KnownPopulationRegistry& reg2,
                          Weights w = {}) {
    const double den = kp_mean_degree(s, reg2, DegreeTarget::UF, w);
    if (den == 0) fail(ErrorCode::DegenerateDenominator, "UF degree estimate is zero");
    return kp_mean_degree(s, reg1, DegreeTarget::FF, w) / den;
}

inline double degree_ratio(const HiddenSurvey& h, const FrameSurvey& s, const KnownPopulationRegistry& reg_hidden,
                           const KnownPopulationRegistry& reg_frame, Weights wh = {}, Weights ws = {}) {
    const double den = kp_mean_degree(s, reg_frame, DegreeTarget::FF, ws);
    if (den == 0) fail(ErrorCode::DegenerateDenominator, "FF degree estimate is zero");
    return mean_degree_hidden_to_frame(h, reg_hidden, wh) / den;
}

// both sides use the groups with size_on_frame > 0
inline double degree_ratio(const HiddenSurvey& h, const FrameSurvey& s, const KnownPopulationRegistry& reg,
                           Weights wh = {}, Weights ws = {}) {
    const auto on = reg.on_frame_only();
    return degree_ratio(h, s, on, on, wh, ws);
}

// sum v w / sum y w over the given columns (all columns when groups is empty)
inline double true_positive_rate(const HiddenSurvey& h, Weights w = {}, const std::vector<std::string>& groups = {}) {
    detail::check_hidden(h, w);
    std::vector<std::size_t> cols;
    if (groups.empty()) {
        for (std::size_t j = 0; j < h.group_ids.size(); ++j) cols.push_back(j);
    } else {
        for (const auto& g : groups) {
            auto j = h.column_of(g);
            if (!j) throw Error(ErrorCode::MissingColumn, g, "hidden survey has no responses for this group");
            cols.push_back(*j);
        }
    }
    double num = 0, den = 0;
    for (std::size_t i = 0; i < h.rows.size(); ++i) {
        Count v = 0, y = 0;
        for (auto c : cols) {
            v += h.rows[i].v[c];
            y += h.rows[i].y[c];
        }
        const double wi = detail::hidden_w(h, w, i);
        num += double(v) * wi;
        den += double(y) * wi;
    }
    if (den == 0) fail(ErrorCode::DegenerateDenominator, "no ties to probe groups in hidden sample");
    return num / den;
}

enum class BasicVariant { classic, modified };

inline double basic_scaleup(const FrameSurvey& s, const KnownPopulationRegistry& reg, BasicVariant v, Weights w = {}) {
    const double y = ht_total_reports_to_hidden(s, w);
    if (v == BasicVariant::classic) {
        const double d_fu = kp_mean_degree(s, reg, DegreeTarget::FU, w) * double(reg.frame_size);
        if (d_fu == 0) fail(ErrorCode::DegenerateDenominator, "estimated d_FU is zero");
        return y / (d_fu / double(reg.universe_size));
    }
    const double d_ff = kp_mean_degree(s, reg, DegreeTarget::FF, w) * double(reg.frame_size);
    if (d_ff == 0) fail(ErrorCode::DegenerateDenominator, "estimated d_FF is zero");
    return y / (d_ff / double(reg.frame_size));
}

inline double generalized_scaleup(const FrameSurvey& s, const HiddenSurvey& h, const KnownPopulationRegistry& reg,
                                  Weights ws = {}, Weights wh = {}) {
    return ht_total_reports_to_hidden(s, ws) / visibility_mean(h, reg, wh);
}

enum class FactorSource { estimated, assumed, census };

struct AdjustmentFactors {
    double phi = 1, delta = 1, tau = 1, eta = 1;
    std::map<std::string, FactorSource> provenance;

    void validate() const {
        if (!(phi > 0) || !(delta > 0) || !(tau > 0) || !(eta > 0))
            fail(ErrorCode::DegenerateDenominator, "adjustment factors must be positive");
        if (tau > 1 || eta > 1) fail(ErrorCode::InvalidArgument, "tau and eta must be at most 1");
    }
};

enum class AdjustVariant { classic_phi_delta_tau, modified_delta_tau, modified_with_eta };

inline double adjusted_scaleup(double basic, const AdjustmentFactors& f, AdjustVariant v) {
    f.validate();
    switch (v) {
        case AdjustVariant::classic_phi_delta_tau: return basic / f.phi / f.delta / f.tau;
        case AdjustVariant::modified_delta_tau: return basic / f.delta / f.tau;
        case AdjustVariant::modified_with_eta: return basic / f.delta / f.tau * f.eta;
    }
    fail(ErrorCode::Internal, "unknown adjustment variant");
}

struct ProbeAlterCheck {
    double mean_y_F_to_H = 0;
    double mean_y_probemembers_to_H = 0;
    double difference = 0;
};

// Weighted mean y_{i,H} over everyone vs over self-reported probe members,
// each membership counted once per group.
inline ProbeAlterCheck probe_alter_check(const FrameSurvey& s, Weights w = {}) {
    detail::check_frame(s, w);
    if (!s.any_membership()) fail(ErrorCode::MissingColumn, "no member_<gid> columns in frame survey");
    double a = 0, aw = 0, m = 0, mw = 0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        const double wi = detail::frame_w(s, w, i);
        const double y = double(s.rows[i].y_hidden);
        a += y * wi;
        aw += wi;
        for (std::size_t j = 0; j < s.group_ids.size(); ++j)
            if (s.has_membership[j] && s.rows[i].member[j]) {
                m += y * wi;
                mw += wi;
            }
    }
    if (mw == 0) fail(ErrorCode::EmptyGroup, "no respondents flagged as probe-group members");
    ProbeAlterCheck r;
    r.mean_y_F_to_H = a / aw;
    r.mean_y_probemembers_to_H = m / mw;
    r.difference = r.mean_y_F_to_H - r.mean_y_probemembers_to_H;
    return r;
}

struct ConsistencyRow {
    std::string group_id;
    Count known_size = 0;
    double estimate = 0;
};

// Each known group in turn plays the hidden population, with the rest as probes.
inline std::vector<ConsistencyRow> internal_consistency(const FrameSurvey& s, const KnownPopulationRegistry& reg,
                                                        BasicVariant v, Weights w = {}) {
    if (reg.groups.size() < 2) fail(ErrorCode::InvalidArgument, "internal consistency needs at least two groups");
    std::vector<ConsistencyRow> out;
    FrameSurvey t = s;
    for (const auto& g : reg.groups) {
        auto col = s.column_of(g.id);
        if (!col) throw Error(ErrorCode::MissingColumn, g.id, "survey has no responses for this group");
        for (std::size_t i = 0; i < s.rows.size(); ++i) t.rows[i].y_hidden = s.rows[i].y_probe[*col];
        out.push_back({g.id, g.size_total, basic_scaleup(t, reg.without(g.id), v, w)});
    }
    return out;
}

// ---- diagnostics ----

// Totals need absolute weights; flag sum(w) more than 10% away from N_F.
inline std::optional<std::string> weight_scale_warning(const FrameSurvey& s, Count frame_size) {
    double sw = 0;
    for (const auto& r : s.rows) sw += r.weight;
    const double ratio = sw / double(frame_size);
    if (std::abs(ratio - 1.0) > 0.10)
        return "frame weights sum to " + std::to_string(sw) + " but N_F = " + std::to_string(frame_size) +
               "; weights may be relative (use --rescale-weights to post-stratify to N_F)";
    return std::nullopt;
}

inline FrameSurvey rescale_to_frame(FrameSurvey s, Count frame_size) {
    double sw = 0;
    for (const auto& r : s.rows) sw += r.weight;
    for (auto& r : s.rows) r.weight *= double(frame_size) / sw;
    return s;
}

// reported, never clamped
inline std::optional<std::string> size_warning(double estimate, Count frame_size) {
    if (estimate > double(frame_size))
        return "estimate " + std::to_string(estimate) + " exceeds N_F = " + std::to_string(frame_size);
    return std::nullopt;
}

}  // namespace nsum

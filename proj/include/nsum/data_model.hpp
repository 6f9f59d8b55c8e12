#pragma once
// Survey, registry and estimate types. Probe responses are stored as dense
// vectors aligned with the survey's group_ids column order.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsum/error.hpp"

namespace nsum {

using Count = std::int64_t;

struct ProbeGroup {
    std::string id;
    Count size_total = 0;     // N_{A_j}
    Count size_on_frame = 0;  // N_{A_j ∩ F}
    bool operator==(const ProbeGroup&) const = default;
};

struct KnownPopulationRegistry {
    std::vector<ProbeGroup> groups;
    Count frame_size = 0;     // N_F
    Count universe_size = 0;  // N

    bool operator==(const KnownPopulationRegistry&) const = default;

    void validate() const {
        if (frame_size <= 0) fail(ErrorCode::InvalidRegistry, "frame_size must be positive");
        if (universe_size <= 0) fail(ErrorCode::InvalidRegistry, "universe_size must be positive");
        if (frame_size > universe_size) fail(ErrorCode::InvalidRegistry, "frame_size exceeds universe_size");
        std::set<std::string> seen;
        for (const auto& g : groups) {
            if (g.id.empty()) fail(ErrorCode::InvalidRegistry, "empty group id");
            if (!seen.insert(g.id).second) throw Error(ErrorCode::DuplicateId, g.id, "duplicate group id");
            if (g.size_total < 0 || g.size_on_frame < 0)
                throw Error(ErrorCode::InvalidRegistry, g.id, "negative group size");
            if (g.size_on_frame > g.size_total)
                throw Error(ErrorCode::InvalidRegistry, g.id, "size_on_frame exceeds size_total");
        }
    }

    std::optional<std::size_t> index_of(const std::string& id) const {
        for (std::size_t j = 0; j < groups.size(); ++j)
            if (groups[j].id == id) return j;
        return std::nullopt;
    }
    const ProbeGroup& group(const std::string& id) const {
        auto j = index_of(id);
        if (!j) throw Error(ErrorCode::UnknownGroup, id, "not in registry");
        return groups[*j];
    }

    Count total_size() const {
        Count s = 0;
        for (const auto& g : groups) s += g.size_total;
        return s;
    }
    Count total_on_frame() const {
        Count s = 0;
        for (const auto& g : groups) s += g.size_on_frame;
        return s;
    }

    // registry restricted to ids, in the order given
    KnownPopulationRegistry subset(const std::vector<std::string>& ids) const {
        KnownPopulationRegistry r{{}, frame_size, universe_size};
        for (const auto& id : ids) r.groups.push_back(group(id));
        return r;
    }
    KnownPopulationRegistry without(const std::string& id) const {
        KnownPopulationRegistry r{{}, frame_size, universe_size};
        for (const auto& g : groups)
            if (g.id != id) r.groups.push_back(g);
        return r;
    }
    // default set for the hidden-side estimators
    KnownPopulationRegistry on_frame_only() const {
        KnownPopulationRegistry r{{}, frame_size, universe_size};
        for (const auto& g : groups)
            if (g.size_on_frame > 0) r.groups.push_back(g);
        return r;
    }
    // groups lying entirely inside the frame (what the modified basic estimator wants)
    KnownPopulationRegistry inside_frame() const {
        KnownPopulationRegistry r{{}, frame_size, universe_size};
        for (const auto& g : groups)
            if (g.size_on_frame > 0 && g.size_on_frame == g.size_total) r.groups.push_back(g);
        return r;
    }
};

enum class DesignKind { srs, stratified_multistage, relative_probability };

inline const char* design_kind_name(DesignKind k) {
    switch (k) {
        case DesignKind::srs: return "srs";
        case DesignKind::stratified_multistage: return "stratified_multistage";
        case DesignKind::relative_probability: return "relative_probability";
    }
    return "?";
}

struct StratumInfo {
    std::string id;
    Count psu_count = 0;  // n_h
    bool operator==(const StratumInfo&) const = default;
};

struct SurveyDesignMeta {
    DesignKind kind = DesignKind::srs;
    std::vector<StratumInfo> strata;
    bool operator==(const SurveyDesignMeta&) const = default;
};

struct FrameRow {
    std::string id;
    double weight = 1.0;  // 1/pi_i
    std::string stratum;
    std::string psu;
    Count y_hidden = 0;                // y_{i,H}
    std::vector<Count> y_probe;        // y_{i,A_j}, aligned with FrameSurvey::group_ids
    std::vector<std::uint8_t> member;  // self-reported membership; only meaningful where has_membership
    bool operator==(const FrameRow&) const = default;
};

struct FrameSurvey {
    std::vector<std::string> group_ids;
    std::vector<bool> has_membership;
    std::vector<FrameRow> rows;
    SurveyDesignMeta design;

    bool operator==(const FrameSurvey&) const = default;

    std::optional<std::size_t> column_of(const std::string& gid) const {
        for (std::size_t j = 0; j < group_ids.size(); ++j)
            if (group_ids[j] == gid) return j;
        return std::nullopt;
    }
    bool any_membership() const {
        for (bool b : has_membership)
            if (b) return true;
        return false;
    }
    std::vector<double> weights() const {
        std::vector<double> w;
        w.reserve(rows.size());
        for (const auto& r : rows) w.push_back(r.weight);
        return w;
    }

    // strata and PSU counts as observed in the rows
    SurveyDesignMeta derive_design() const {
        std::map<std::string, std::set<std::string>> psus;
        for (const auto& r : rows) psus[r.stratum].insert(r.psu);
        SurveyDesignMeta d;
        bool psu_per_row = true;
        std::size_t total = 0;
        for (const auto& [h, s] : psus) {
            d.strata.push_back({h, Count(s.size())});
            total += s.size();
        }
        psu_per_row = total == rows.size();
        d.kind = (psus.size() <= 1 && psu_per_row) ? DesignKind::srs : DesignKind::stratified_multistage;
        return d;
    }

    void validate() const {
        if (has_membership.size() != group_ids.size()) fail(ErrorCode::Internal, "membership mask size");
        std::set<std::string> ids;
        for (const auto& r : rows) {
            if (!ids.insert(r.id).second) throw Error(ErrorCode::DuplicateId, r.id, "duplicate respondent id");
            if (!std::isfinite(r.weight) || r.weight <= 0)
                throw Error(ErrorCode::NonpositiveWeight, r.id, "weight " + std::to_string(r.weight));
            if (r.y_hidden < 0) throw Error(ErrorCode::NonIntegerCount, r.id, "negative y_hidden");
            if (r.y_probe.size() != group_ids.size() || r.member.size() != group_ids.size())
                throw Error(ErrorCode::MissingValue, r.id, "probe vector length");
            for (Count y : r.y_probe)
                if (y < 0) throw Error(ErrorCode::NonIntegerCount, r.id, "negative probe count");
        }
    }
};

struct HiddenRow {
    std::string id;
    double rel_weight = 1.0;             // 1/(c pi_i)
    std::vector<Count> y;                // y_{i,A_j ∩ F}
    std::vector<Count> v;                // reported visibility to A_j ∩ F
    std::optional<int> group_flag;       // 0/1, for the two-group bootstrap
    std::vector<std::string> passthrough;  // unparsed extra columns, kept verbatim
    bool operator==(const HiddenRow&) const = default;
};

struct HiddenSurvey {
    std::vector<std::string> group_ids;
    std::vector<std::string> passthrough_columns;
    std::vector<HiddenRow> rows;
    bool weight_scale_known = false;

    bool operator==(const HiddenSurvey&) const = default;

    std::optional<std::size_t> column_of(const std::string& gid) const {
        for (std::size_t j = 0; j < group_ids.size(); ++j)
            if (group_ids[j] == gid) return j;
        return std::nullopt;
    }
    std::vector<double> weights() const {
        std::vector<double> w;
        w.reserve(rows.size());
        for (const auto& r : rows) w.push_back(r.rel_weight);
        return w;
    }

    void validate() const {
        if (rows.empty()) fail(ErrorCode::EmptySample, "hidden survey has no rows");
        std::set<std::string> ids;
        for (const auto& r : rows) {
            if (!ids.insert(r.id).second) throw Error(ErrorCode::DuplicateId, r.id, "duplicate respondent id");
            if (!std::isfinite(r.rel_weight) || r.rel_weight <= 0)
                throw Error(ErrorCode::NonpositiveWeight, r.id, "rel_weight " + std::to_string(r.rel_weight));
            if (r.y.size() != group_ids.size() || r.v.size() != group_ids.size())
                throw Error(ErrorCode::MissingValue, r.id, "probe vector length");
            for (std::size_t j = 0; j < group_ids.size(); ++j) {
                if (r.y[j] < 0 || r.v[j] < 0) throw Error(ErrorCode::NonIntegerCount, r.id, "negative count");
                if (r.v[j] > r.y[j])
                    throw Error(ErrorCode::VisibilityExceedsTies, r.id,
                                "group " + group_ids[j] + ": v=" + std::to_string(r.v[j]) +
                                    " > y=" + std::to_string(r.y[j]));
            }
            if (r.group_flag && *r.group_flag != 0 && *r.group_flag != 1)
                throw Error(ErrorCode::Parse, r.id, "group_flag must be 0 or 1");
        }
    }
};

struct Interval {
    double low = 0, high = 0, level = 0.95;
    bool operator==(const Interval&) const = default;
};

struct Estimate {
    double value = 0;
    std::vector<double> replicates;
    std::optional<Interval> interval;
    std::string method;
    std::string inputs_digest;
    std::size_t excluded_replicates = 0;
    nlohmann::json metadata = nlohmann::json::object();  // resolved config, seed, warnings

    bool operator==(const Estimate&) const = default;
};

}  // namespace nsum

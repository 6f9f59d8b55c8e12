#pragma once
// Sampling designs over synthetic populations, and bootstrap resamplers over
// observed surveys. Replicate b always draws from stream (seed, b).

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nsum/data_model.hpp"
#include "nsum/netsim.hpp"
#include "nsum/rng.hpp"

namespace nsum {

struct DrawnSample {
    std::vector<NodeId> member_ids;
    std::vector<double> inclusion_weights;  // 1/pi, or 1/(c pi) when relative_only
    bool relative_only = false;
};

inline DrawnSample srs_from_frame(const PopulationGraph& g, std::size_t n, std::uint64_t seed) {
    std::vector<NodeId> frame;
    for (NodeId i = 0; i < g.n; ++i)
        if (g.in_frame[i]) frame.push_back(i);
    if (n == 0) fail(ErrorCode::InvalidArgument, "sample size must be positive");
    if (n > frame.size()) fail(ErrorCode::InvalidArgument, "n exceeds frame size");
    Philox rng(seed, 0x737273);
    partial_shuffle(frame, n, rng);
    DrawnSample s;
    s.member_ids.assign(frame.begin(), frame.begin() + std::ptrdiff_t(n));
    s.inclusion_weights.assign(n, double(frame.size()) / double(n));
    return s;
}

// Successive sampling with selection weight d_i^exponent; the returned relative
// weights are 1/d_i^exponent.
inline DrawnSample relative_sample_from_hidden(const PopulationGraph& g, std::size_t n, double exponent,
                                               std::uint64_t seed) {
    std::vector<NodeId> pool;
    std::vector<double> sel;
    for (NodeId i = 0; i < g.n; ++i) {
        if (!g.in_hidden[i]) continue;
        const double d = double(g.social[i].size());
        if (exponent != 0 && d == 0) fail(ErrorCode::InvalidArgument, "isolated hidden node with nonzero exponent");
        pool.push_back(i);
        sel.push_back(exponent == 0 ? 1.0 : std::pow(d, exponent));
    }
    if (n == 0) fail(ErrorCode::InvalidArgument, "sample size must be positive");
    if (n > pool.size()) fail(ErrorCode::InvalidArgument, "n exceeds hidden population size");
    Philox rng(seed, 0x726573);
    DrawnSample s;
    s.relative_only = true;
    double remaining = 0;
    for (double x : sel) remaining += x;
    for (std::size_t k = 0; k < n; ++k) {
        double u = rng.uniform() * remaining;
        std::size_t pick = pool.size() - 1;
        for (std::size_t t = 0; t < pool.size(); ++t) {
            if (u < sel[t]) {
                pick = t;
                break;
            }
            u -= sel[t];
        }
        s.member_ids.push_back(pool[pick]);
        s.inclusion_weights.push_back(1.0 / sel[pick]);
        // recompute instead of subtracting to avoid drift
        pool.erase(pool.begin() + std::ptrdiff_t(pick));
        sel.erase(sel.begin() + std::ptrdiff_t(pick));
        remaining = 0;
        for (double x : sel) remaining += x;
    }
    return s;
}

// ---- resamplers ----

inline constexpr std::uint64_t kFrameDomain = 0x4652414d45ull;
inline constexpr std::uint64_t kHiddenDomain = 0x484944444eull;

using IndexMultiset = std::vector<std::uint32_t>;

inline IndexMultiset simple_bootstrap_replicate(std::size_t n, std::uint64_t seed, std::uint64_t b) {
    Philox rng(seed, derive(kFrameDomain, b));
    IndexMultiset m(n);
    for (auto& x : m) x = std::uint32_t(rng.below(n));
    return m;
}

inline std::vector<IndexMultiset> simple_bootstrap(std::size_t n, std::size_t B, std::uint64_t seed) {
    if (n == 0 || B == 0) fail(ErrorCode::InvalidArgument, "simple_bootstrap needs n >= 1 and B >= 1");
    std::vector<IndexMultiset> out;
    out.reserve(B);
    for (std::size_t b = 0; b < B; ++b) out.push_back(simple_bootstrap_replicate(n, seed, b));
    return out;
}

// per-row counts of a multiset
inline std::vector<double> multiplicities(const IndexMultiset& m, std::size_t n) {
    std::vector<double> c(n, 0.0);
    for (auto i : m) c[i] += 1.0;
    return c;
}

// Stratum/PSU structure of a frame survey, in first-appearance order.
struct PsuLayout {
    std::vector<std::string> strata;
    std::vector<std::vector<std::vector<std::size_t>>> psu_rows;  // [stratum][psu] -> row indices
};

inline PsuLayout psu_layout(const FrameSurvey& s) {
    PsuLayout L;
    std::map<std::string, std::size_t> hidx;
    std::vector<std::map<std::string, std::size_t>> pidx;
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
        const auto& row = s.rows[r];
        auto [hit, hnew] = hidx.emplace(row.stratum, L.strata.size());
        if (hnew) {
            L.strata.push_back(row.stratum);
            L.psu_rows.emplace_back();
            pidx.emplace_back();
        }
        const std::size_t h = hit->second;
        auto [pit, pnew] = pidx[h].emplace(row.psu, L.psu_rows[h].size());
        if (pnew) L.psu_rows[h].emplace_back();
        L.psu_rows[h][pit->second].push_back(r);
    }
    return L;
}

inline void check_rescaled_prereqs(const PsuLayout& L) {
    if (L.strata.empty()) fail(ErrorCode::EmptySample, "frame survey has no rows");
    for (std::size_t h = 0; h < L.strata.size(); ++h)
        if (L.psu_rows[h].size() < 2)
            throw Error(ErrorCode::SingletonStratum, L.strata[h], "rescaled bootstrap needs n_h >= 2 PSUs");
}

// Replicate weights for one replicate given the per-PSU selection counts.
inline std::vector<double> rescaled_weights_from_counts(const FrameSurvey& s, const PsuLayout& L,
                                                        const std::vector<std::vector<std::uint32_t>>& r) {
    std::vector<double> w(s.rows.size(), 0.0);
    for (std::size_t h = 0; h < L.strata.size(); ++h) {
        const double nh = double(L.psu_rows[h].size());
        const double scale = nh / (nh - 1.0);
        for (std::size_t i = 0; i < L.psu_rows[h].size(); ++i)
            for (std::size_t row : L.psu_rows[h][i]) w[row] = s.rows[row].weight * scale * double(r[h][i]);
    }
    return w;
}

inline std::vector<double> rescaled_bootstrap_replicate(const FrameSurvey& s, const PsuLayout& L, std::uint64_t seed,
                                                        std::uint64_t b) {
    Philox rng(seed, derive(kFrameDomain, b));
    std::vector<std::vector<std::uint32_t>> r(L.strata.size());
    for (std::size_t h = 0; h < L.strata.size(); ++h) {
        const std::size_t nh = L.psu_rows[h].size();
        r[h].assign(nh, 0);
        for (std::size_t k = 0; k + 1 < nh; ++k) ++r[h][rng.below(nh)];
    }
    return rescaled_weights_from_counts(s, L, r);
}

inline std::vector<std::vector<double>> rescaled_bootstrap(const FrameSurvey& s, std::size_t B, std::uint64_t seed) {
    const auto L = psu_layout(s);
    check_rescaled_prereqs(L);
    std::vector<std::vector<double>> out;
    out.reserve(B);
    for (std::size_t b = 0; b < B; ++b) out.push_back(rescaled_bootstrap_replicate(s, L, seed, b));
    return out;
}

// ---- two-group chain bootstrap for the hidden sample ----

enum class ChainSource { marginal, row_order };

struct RdsModel {
    std::vector<int> group;                   // per row, 0 or 1
    std::array<std::vector<std::size_t>, 2> members;
    std::array<std::array<double, 2>, 2> transition{};  // transition[from][to]
    std::array<double, 2> start{};                      // initial group distribution
    bool single_group = false;
};

// Visibility used for the median split: sum of reported visibility over groups.
inline std::vector<int> median_split(const HiddenSurvey& h) {
    std::vector<double> vis;
    for (const auto& r : h.rows) {
        double s = 0;
        for (auto v : r.v) s += double(v);
        vis.push_back(s);
    }
    auto sorted = vis;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double med = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<int> g;
    for (double x : vis) g.push_back(x > med ? 1 : 0);
    return g;
}

inline RdsModel rds_model(const HiddenSurvey& h, ChainSource source = ChainSource::marginal) {
    if (h.rows.empty()) fail(ErrorCode::EmptySample, "hidden survey has no rows");
    RdsModel m;
    const bool flagged = std::all_of(h.rows.begin(), h.rows.end(), [](const HiddenRow& r) { return r.group_flag.has_value(); });
    if (flagged)
        for (const auto& r : h.rows) m.group.push_back(*r.group_flag);
    else
        m.group = median_split(h);
    for (std::size_t i = 0; i < m.group.size(); ++i) m.members[m.group[i]].push_back(i);
    const double n = double(h.rows.size());
    m.start = {double(m.members[0].size()) / n, double(m.members[1].size()) / n};
    m.single_group = m.members[0].empty() || m.members[1].empty();
    if (source == ChainSource::marginal || m.single_group || h.rows.size() < 2) {
        m.transition = {{{m.start[0], m.start[1]}, {m.start[0], m.start[1]}}};
        return m;
    }
    std::array<std::array<double, 2>, 2> cnt{};
    for (std::size_t i = 0; i + 1 < m.group.size(); ++i) cnt[m.group[i]][m.group[i + 1]] += 1;
    for (int a = 0; a < 2; ++a) {
        const double row = cnt[a][0] + cnt[a][1];
        if (row == 0) throw Error(ErrorCode::EmptyGroup, "group " + std::to_string(a), "no observed transitions out of group");
        m.transition[a] = {cnt[a][0] / row, cnt[a][1] / row};
    }
    // start from the chain's stationary distribution
    const double p01 = m.transition[0][1], p10 = m.transition[1][0];
    if (p01 + p10 > 0) m.start = {p10 / (p01 + p10), p01 / (p01 + p10)};
    return m;
}

inline IndexMultiset rds_bootstrap_replicate(const RdsModel& m, std::size_t n, std::uint64_t seed, std::uint64_t b) {
    Philox rng(seed, derive(kHiddenDomain, b));
    IndexMultiset out(n);
    if (m.single_group) {
        for (auto& x : out) x = std::uint32_t(rng.below(n));
        return out;
    }
    int g = rng.uniform() < m.start[0] ? 0 : 1;
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) g = rng.uniform() < m.transition[g][0] ? 0 : 1;
        const auto& mem = m.members[g];
        out[k] = std::uint32_t(mem[rng.below(mem.size())]);
    }
    return out;
}

inline std::vector<IndexMultiset> rds_two_group_bootstrap(const HiddenSurvey& h, std::size_t B, std::uint64_t seed,
                                                          ChainSource source = ChainSource::marginal) {
    const auto m = rds_model(h, source);
    std::vector<IndexMultiset> out;
    out.reserve(B);
    for (std::size_t b = 0; b < B; ++b) out.push_back(rds_bootstrap_replicate(m, h.rows.size(), seed, b));
    return out;
}

// hidden simple bootstrap draws from its own domain so it is independent of the frame side
inline IndexMultiset hidden_simple_bootstrap_replicate(std::size_t n, std::uint64_t seed, std::uint64_t b) {
    Philox rng(seed, derive(kHiddenDomain, b));
    IndexMultiset m(n);
    for (auto& x : m) x = std::uint32_t(rng.below(n));
    return m;
}

template <class A, class B>
std::vector<std::pair<A, B>> two_sample_replicates(const std::vector<A>& frame_reps, const std::vector<B>& hidden_reps) {
    if (frame_reps.size() != hidden_reps.size())
        fail(ErrorCode::LengthMismatch, "frame and hidden replicate counts differ");
    std::vector<std::pair<A, B>> out;
    out.reserve(frame_reps.size());
    for (std::size_t b = 0; b < frame_reps.size(); ++b) out.emplace_back(frame_reps[b], hidden_reps[b]);
    return out;
}

}  // namespace nsum

#pragma once
// Stochastic block model populations with a frame attribute and a hidden
// attribute, the reporting graph derived from them, and exact census counts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nsum/error.hpp"
#include "nsum/rng.hpp"

namespace nsum {

using NodeId = std::uint32_t;

struct SimConfig {
    std::int64_t n = 5000;
    double p_frame = 1.0;
    double p_hidden = 0.03;
    double p_frame_given_hidden = 1.0;
    double zeta = 0.05;
    double xi = 0.4;
    double rho = 1.0;
    double tau = 1.0;
    std::uint64_t seed = 0;

    bool operator==(const SimConfig&) const = default;

    void validate() const {
        auto bad = [](const char* what) { fail(ErrorCode::InvalidConfig, what); };
        if (n <= 0) bad("n must be positive");
        if (!(p_frame > 0 && p_frame <= 1)) bad("p_frame must be in (0,1]");
        if (!(p_hidden > 0 && p_hidden < 1)) bad("p_hidden must be in (0,1)");
        if (!(p_frame_given_hidden >= 0 && p_frame_given_hidden <= 1)) bad("p_frame_given_hidden must be in [0,1]");
        if (!(zeta > 0 && zeta <= 1)) bad("zeta must be in (0,1]");
        if (!(xi > 0 && xi <= 1)) bad("xi must be in (0,1]");
        if (!(rho > 0 && rho <= 1)) bad("rho must be in (0,1]");
        if (!(tau > 0 && tau <= 1)) bad("tau must be in (0,1]");
        if (zeta * std::max({1.0, xi, rho, xi * rho}) > 1) bad("zeta*max(1,xi,rho,xi*rho) exceeds 1");
    }
};

inline nlohmann::json to_json(const SimConfig& c) {
    return {{"schema_version", 1}, {"n", c.n},       {"p_frame", c.p_frame}, {"p_hidden", c.p_hidden},
            {"p_frame_given_hidden", c.p_frame_given_hidden}, {"zeta", c.zeta}, {"xi", c.xi},
            {"rho", c.rho},         {"tau", c.tau},   {"seed", c.seed}};
}

// Missing keys keep the values already in `base`.
inline SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig base = {}) {
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& k = it.key();
            if (k == "n") base.n = it->get<std::int64_t>();
            else if (k == "p_frame") base.p_frame = it->get<double>();
            else if (k == "p_hidden") base.p_hidden = it->get<double>();
            else if (k == "p_frame_given_hidden") base.p_frame_given_hidden = it->get<double>();
            else if (k == "zeta") base.zeta = it->get<double>();
            else if (k == "xi") base.xi = it->get<double>();
            else if (k == "rho") base.rho = it->get<double>();
            else if (k == "tau") base.tau = it->get<double>();
            else if (k == "seed") base.seed = it->get<std::uint64_t>();
            else if (k == "schema_version") continue;
            else fail(ErrorCode::InvalidConfig, "unknown SimConfig key " + k);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, e.what());
    }
    return base;
}

// Blocks: 0 = F∩H, 1 = F∩¬H, 2 = ¬F∩H, 3 = ¬F∩¬H
inline int block_of(bool frame, bool hidden) { return (frame ? 0 : 2) + (hidden ? 0 : 1); }

inline std::array<std::array<double, 4>, 4> mixing_matrix(const SimConfig& c) {
    std::array<std::array<double, 4>, 4> m{};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const bool diff_f = (a >> 1) != (b >> 1);
            const bool diff_h = (a & 1) != (b & 1);
            m[a][b] = c.zeta * (diff_h ? c.rho : 1.0) * (diff_f ? c.xi : 1.0);
        }
    return m;
}

struct PopulationGraph {
    std::size_t n = 0;
    std::vector<std::uint8_t> in_frame;
    std::vector<std::uint8_t> in_hidden;
    std::vector<std::vector<NodeId>> social;   // sorted neighbour lists
    std::vector<std::vector<NodeId>> reports;  // reports[i] = sorted j with i -> j

    std::size_t social_edge_count() const {
        std::size_t s = 0;
        for (const auto& a : social) s += a.size();
        return s / 2;
    }
    std::size_t report_edge_count() const {
        std::size_t s = 0;
        for (const auto& a : reports) s += a.size();
        return s;
    }
    std::size_t degree(NodeId i) const { return social[i].size(); }

    // Build from explicit edge lists; checks the invariants.
    static PopulationGraph from_edges(std::size_t n, std::vector<std::uint8_t> frame, std::vector<std::uint8_t> hidden,
                                      const std::vector<std::pair<NodeId, NodeId>>& social_edges,
                                      const std::vector<std::pair<NodeId, NodeId>>& report_edges) {
        if (frame.size() != n || hidden.size() != n) fail(ErrorCode::InvalidArgument, "membership vector length");
        PopulationGraph g;
        g.n = n;
        g.in_frame = std::move(frame);
        g.in_hidden = std::move(hidden);
        g.social.assign(n, {});
        g.reports.assign(n, {});
        for (auto [a, b] : social_edges) {
            if (a >= n || b >= n || a == b) fail(ErrorCode::InvalidArgument, "bad social edge");
            g.social[a].push_back(b);
            g.social[b].push_back(a);
        }
        for (auto& l : g.social) {
            std::sort(l.begin(), l.end());
            if (std::adjacent_find(l.begin(), l.end()) != l.end()) fail(ErrorCode::InvalidArgument, "duplicate social edge");
        }
        for (auto [a, b] : report_edges) {
            if (a >= n || b >= n) fail(ErrorCode::InvalidArgument, "bad report edge");
            if (!g.in_hidden[b]) fail(ErrorCode::InvalidArgument, "report edge targets a non-hidden node");
            if (!std::binary_search(g.social[a].begin(), g.social[a].end(), b))
                fail(ErrorCode::InvalidArgument, "report edge without a social tie");
            g.reports[a].push_back(b);
        }
        for (auto& l : g.reports) {
            std::sort(l.begin(), l.end());
            if (std::adjacent_find(l.begin(), l.end()) != l.end()) fail(ErrorCode::InvalidArgument, "duplicate report edge");
        }
        return g;
    }
};

struct MembershipCounts {
    std::int64_t n_hidden, n_frame_hidden, n_frame;
};

inline MembershipCounts membership_counts(const SimConfig& c) {
    MembershipCounts m;
    m.n_hidden = std::llround(double(c.n) * c.p_hidden);
    m.n_frame_hidden = std::llround(double(m.n_hidden) * c.p_frame_given_hidden);
    m.n_frame = std::llround(double(c.n) * c.p_frame);
    if (m.n_hidden < 1) fail(ErrorCode::InfeasibleMembership, "round(N*p_H) is zero");
    if (m.n_frame < 1) fail(ErrorCode::InfeasibleMembership, "round(N*p_F) is zero");
    if (m.n_frame_hidden > m.n_frame) fail(ErrorCode::InfeasibleMembership, "p_{F|H}*N_H exceeds N_F");
    if (m.n_frame - m.n_frame_hidden > c.n - m.n_hidden)
        fail(ErrorCode::InfeasibleMembership, "frame members outside H exceed the non-hidden population");
    return m;
}

namespace detail {

// Calls emit(k) for each k in [0, total) kept independently with probability p.
template <class Emit>
void bernoulli_skip(std::uint64_t total, double p, Philox& rng, Emit&& emit) {
    if (p <= 0 || total == 0) return;
    std::uint64_t k = 0;
    for (;;) {
        const std::uint64_t skip = rng.geometric(p);
        if (skip >= total - k) return;
        k += skip;
        emit(k);
        if (++k >= total) return;
    }
}

}  // namespace detail

inline PopulationGraph generate_population(const SimConfig& cfg) {
    cfg.validate();
    const auto counts = membership_counts(cfg);
    const std::size_t n = std::size_t(cfg.n);
    Philox rng(cfg.seed, 0x6e6574);

    std::vector<NodeId> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = NodeId(i);
    partial_shuffle(perm, n, rng);

    PopulationGraph g;
    g.n = n;
    g.in_frame.assign(n, 0);
    g.in_hidden.assign(n, 0);
    // perm[0, N_H) hidden, of which the first N_{F∩H} are on the frame;
    // the frame is topped up from the start of the non-hidden part.
    const std::size_t nh = std::size_t(counts.n_hidden);
    for (std::size_t k = 0; k < nh; ++k) {
        g.in_hidden[perm[k]] = 1;
        if (k < std::size_t(counts.n_frame_hidden)) g.in_frame[perm[k]] = 1;
    }
    const std::size_t extra = std::size_t(counts.n_frame - counts.n_frame_hidden);
    for (std::size_t k = 0; k < extra; ++k) g.in_frame[perm[nh + k]] = 1;

    std::array<std::vector<NodeId>, 4> blocks;
    for (NodeId i = 0; i < n; ++i) blocks[block_of(g.in_frame[i], g.in_hidden[i])].push_back(i);

    const auto M = mixing_matrix(cfg);
    g.social.assign(n, {});
    for (int a = 0; a < 4; ++a) {
        const auto& A = blocks[a];
        // within block: pairs (i<j) enumerated row by row
        {
            const std::uint64_t m = A.size();
            const std::uint64_t total = m < 2 ? 0 : m * (m - 1) / 2;
            std::uint64_t row = 0, row_start = 0, row_len = m - 1;
            detail::bernoulli_skip(total, M[a][a], rng, [&](std::uint64_t k) {
                while (k >= row_start + row_len) {
                    row_start += row_len;
                    ++row;
                    --row_len;
                }
                const NodeId u = A[row], v = A[row + 1 + (k - row_start)];
                g.social[u].push_back(v);
                g.social[v].push_back(u);
            });
        }
        for (int b = a + 1; b < 4; ++b) {
            const auto& B = blocks[b];
            const std::uint64_t mb = B.size();
            detail::bernoulli_skip(std::uint64_t(A.size()) * mb, M[a][b], rng, [&](std::uint64_t k) {
                const NodeId u = A[k / mb], v = B[k % mb];
                g.social[u].push_back(v);
                g.social[v].push_back(u);
            });
        }
    }
    for (auto& l : g.social) std::sort(l.begin(), l.end());

    // i -> j whenever j is hidden and tied to i
    g.reports.assign(n, {});
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j : g.social[i])
            if (g.in_hidden[j]) g.reports[i].push_back(j);
    return g;
}

// Removes exactly round((1-tau)|E_{F->H}|) frame-to-hidden report edges,
// chosen uniformly. Same seed => nested removal sets across tau.
inline PopulationGraph apply_transmission_error(const PopulationGraph& g, double tau, std::uint64_t seed) {
    if (!(tau > 0 && tau <= 1)) fail(ErrorCode::InvalidArgument, "tau must be in (0,1]");
    PopulationGraph out = g;
    std::vector<std::pair<NodeId, NodeId>> fh;
    for (NodeId i = 0; i < g.n; ++i)
        if (g.in_frame[i])
            for (NodeId j : g.reports[i])
                if (g.in_hidden[j]) fh.emplace_back(i, j);
    const auto k = std::size_t(std::llround((1.0 - tau) * double(fh.size())));
    if (k == 0) return out;
    Philox rng(seed, 0x747261);
    partial_shuffle(fh, k, rng);
    std::sort(fh.begin(), fh.begin() + std::ptrdiff_t(k));
    for (std::size_t e = 0; e < k; ++e) {
        auto& l = out.reports[fh[e].first];
        l.erase(std::lower_bound(l.begin(), l.end(), fh[e].second));
    }
    return out;
}

struct CensusQuantities {
    std::int64_t n = 0, n_f = 0, n_h = 0;
    std::int64_t y_FH = 0;  // out-reports from F to H
    std::int64_t v_HF = 0;  // in-reports to H from F
    double v_bar_HF = 0;
    std::int64_t d_FF = 0, d_UF = 0, d_FU = 0, d_HF = 0;
    double d_bar_FF = 0, d_bar_UF = 0, d_bar_HF = 0;
    double phi = 0, delta = 0, tau = 0;
    std::int64_t total_out_reports = 0, total_in_reports = 0;
};

inline CensusQuantities census_quantities(const PopulationGraph& g) {
    CensusQuantities c;
    c.n = std::int64_t(g.n);
    if (g.n == 0) fail(ErrorCode::EmptySample, "empty graph");
    std::vector<std::int64_t> d_to_frame(g.n, 0), in_from_frame(g.n, 0), in_all(g.n, 0);
    for (NodeId i = 0; i < g.n; ++i) {
        c.n_f += g.in_frame[i];
        c.n_h += g.in_hidden[i];
        for (NodeId j : g.social[i]) d_to_frame[i] += g.in_frame[j];
        for (NodeId j : g.reports[i]) {
            ++in_all[j];
            if (g.in_frame[i]) ++in_from_frame[j];
        }
        c.total_out_reports += std::int64_t(g.reports[i].size());
    }
    if (c.n_h == 0) fail(ErrorCode::EmptySample, "no hidden nodes");
    if (c.n_f == 0) fail(ErrorCode::EmptySample, "empty frame");
    for (NodeId i = 0; i < g.n; ++i) {
        c.total_in_reports += in_all[i];
        c.d_UF += d_to_frame[i];
        if (g.in_frame[i]) {
            c.d_FF += d_to_frame[i];
            c.d_FU += std::int64_t(g.social[i].size());
            for (NodeId j : g.reports[i]) c.y_FH += g.in_hidden[j];
        }
        if (g.in_hidden[i]) {
            c.d_HF += d_to_frame[i];
            c.v_HF += in_from_frame[i];
        }
    }
    c.d_bar_FF = double(c.d_FF) / double(c.n_f);
    c.d_bar_UF = double(c.d_UF) / double(c.n);
    c.d_bar_HF = double(c.d_HF) / double(c.n_h);
    c.v_bar_HF = double(c.v_HF) / double(c.n_h);
    if (c.d_FF == 0) fail(ErrorCode::DegenerateDenominator, "d_FF = 0");
    if (c.d_UF == 0) fail(ErrorCode::DegenerateDenominator, "d_UF = 0");
    if (c.d_HF == 0) fail(ErrorCode::DegenerateDenominator, "d_HF = 0");
    c.phi = c.d_bar_FF / c.d_bar_UF;
    c.delta = c.d_bar_HF / c.d_bar_FF;
    c.tau = c.v_bar_HF / c.d_bar_HF;
    return c;
}

// y_FH / (d_FU / N): the classic basic estimator applied to the whole frame
inline double basic_estimand(const CensusQuantities& c) { return double(c.y_FH) / c.d_bar_UF; }
inline double generalized_estimand(const CensusQuantities& c) {
    if (c.v_HF == 0) fail(ErrorCode::DegenerateVisibility, "v_HF = 0");
    return double(c.y_FH) / c.v_bar_HF;
}

inline double predicted_basic_bias(const CensusQuantities& c, double basic) {
    if (!(c.phi > 0 && c.delta > 0 && c.tau > 0)) fail(ErrorCode::DegenerateDenominator, "zero adjustment factor");
    return basic * (1.0 - 1.0 / (c.phi * c.delta * c.tau));
}

// "u v" per line for social edges with u < v
inline void write_edge_list(const PopulationGraph& g, std::ostream& os) {
    for (NodeId i = 0; i < g.n; ++i)
        for (NodeId j : g.social[i])
            if (i < j) os << i << ' ' << j << '\n';
}

inline void write_node_csv(const PopulationGraph& g, std::ostream& os) {
    os << "node,in_frame,in_hidden,degree,out_reports\n";
    for (NodeId i = 0; i < g.n; ++i)
        os << i << ',' << int(g.in_frame[i]) << ',' << int(g.in_hidden[i]) << ',' << g.social[i].size() << ','
           << g.reports[i].size() << '\n';
}

}  // namespace nsum

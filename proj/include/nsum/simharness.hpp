#pragma once
// Simulation harness: networks -> transmission error -> surveys -> estimates,
// aggregated per grid cell and compared with the predicted basic bias.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nsum/data_model.hpp"
#include "nsum/estimators.hpp"
#include "nsum/netsim.hpp"
#include "nsum/parallel.hpp"
#include "nsum/rng.hpp"
#include "nsum/sampling.hpp"
#include "nsum/sensitivity.hpp"

namespace nsum {

// Probe groups: the frame is split into frame_groups groups ("f1".."fK") and
// the rest of the population into other_groups groups ("u1".."uK"). With
// coverage < 1 only that fraction of each side gets a group. biased assigns
// the highest-degree nodes instead of a uniform draw.
struct ProbeDesign {
    std::size_t frame_groups = 4;
    std::size_t other_groups = 4;
    double coverage = 1.0;
    bool biased = false;
};

struct ProbeAssignment {
    KnownPopulationRegistry registry;                       // all groups
    std::vector<std::vector<std::uint16_t>> groups_of_node;  // per node

    // frame-side groups only (N_A ⊂ F)
    KnownPopulationRegistry frame_registry() const { return registry.on_frame_only(); }
};

inline ProbeAssignment assign_probe_groups(const PopulationGraph& g, const ProbeDesign& d, std::uint64_t seed) {
    if (d.frame_groups == 0) fail(ErrorCode::InvalidArgument, "need at least one frame probe group");
    if (!(d.coverage > 0 && d.coverage <= 1)) fail(ErrorCode::InvalidArgument, "coverage must be in (0,1]");
    Philox rng(seed, 0x70726f);
    ProbeAssignment a;
    a.groups_of_node.assign(g.n, {});
    std::int64_t nf = 0;
    for (NodeId i = 0; i < g.n; ++i) nf += g.in_frame[i];
    a.registry.frame_size = nf;
    a.registry.universe_size = std::int64_t(g.n);

    auto split = [&](bool frame_side, std::size_t k, const char* prefix) {
        std::vector<NodeId> nodes;
        for (NodeId i = 0; i < g.n; ++i)
            if (bool(g.in_frame[i]) == frame_side) nodes.push_back(i);
        if (nodes.empty() || k == 0) return;
        if (d.biased)
            std::stable_sort(nodes.begin(), nodes.end(),
                             [&](NodeId x, NodeId y) { return g.social[x].size() > g.social[y].size(); });
        else
            partial_shuffle(nodes, nodes.size(), rng);
        const auto covered = std::size_t(std::llround(d.coverage * double(nodes.size())));
        if (covered < k) {
            if (frame_side) fail(ErrorCode::InvalidArgument, "probe-group assignment infeasible: too few frame nodes");
            k = covered;
        }
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t lo = covered * j / k, hi = covered * (j + 1) / k;
            const auto gid = std::uint16_t(a.registry.groups.size());
            for (std::size_t t = lo; t < hi; ++t) a.groups_of_node[nodes[t]].push_back(gid);
            const auto size = std::int64_t(hi - lo);
            a.registry.groups.push_back({prefix + std::to_string(j + 1), size, frame_side ? size : 0});
        }
    };
    split(true, d.frame_groups, "f");
    split(false, d.other_groups, "u");
    a.registry.validate();
    return a;
}

// Per-node response counts for every probe group, computed once per network.
struct NetworkTables {
    std::size_t groups = 0;
    std::vector<Count> y_hidden;      // out-reports (all to hidden nodes)
    std::vector<Count> ties;          // [node*G + k] neighbours in group k
    std::vector<Count> ties_on_frame; // neighbours in group k ∩ F
    std::vector<Count> vis;           // in-reports from group k ∩ F
};

inline NetworkTables network_tables(const PopulationGraph& g, const ProbeAssignment& a) {
    NetworkTables t;
    const std::size_t G = a.registry.groups.size();
    t.groups = G;
    t.y_hidden.resize(g.n);
    t.ties.assign(g.n * G, 0);
    t.ties_on_frame.assign(g.n * G, 0);
    t.vis.assign(g.n * G, 0);
    for (NodeId i = 0; i < g.n; ++i) {
        t.y_hidden[i] = Count(g.reports[i].size());
        for (NodeId j : g.social[i])
            for (auto k : a.groups_of_node[j]) {
                ++t.ties[i * G + k];
                if (g.in_frame[j]) ++t.ties_on_frame[i * G + k];
            }
        if (g.in_frame[i])
            for (NodeId j : g.reports[i])
                for (auto k : a.groups_of_node[i]) ++t.vis[j * G + k];
    }
    return t;
}

inline std::pair<FrameSurvey, HiddenSurvey> synthesize_surveys(const PopulationGraph& g, const DrawnSample& frame_sample,
                                                               const DrawnSample& hidden_sample, const ProbeAssignment& a,
                                                               const NetworkTables& t) {
    const std::size_t G = t.groups;
    FrameSurvey fs;
    fs.group_ids = group_ids_of(a.registry);
    fs.has_membership.assign(G, true);
    fs.rows.reserve(frame_sample.member_ids.size());
    for (std::size_t r = 0; r < frame_sample.member_ids.size(); ++r) {
        const NodeId i = frame_sample.member_ids[r];
        if (!g.in_frame[i]) fail(ErrorCode::InvalidArgument, "frame sample contains a non-frame node");
        FrameRow row;
        row.id = "n" + std::to_string(i);
        row.weight = frame_sample.inclusion_weights[r];
        row.stratum = "s1";
        row.psu = row.id;
        row.y_hidden = t.y_hidden[i];
        row.y_probe.assign(t.ties.begin() + std::ptrdiff_t(i * G), t.ties.begin() + std::ptrdiff_t(i * G + G));
        row.member.assign(G, 0);
        for (auto k : a.groups_of_node[i]) row.member[k] = 1;
        fs.rows.push_back(std::move(row));
    }
    fs.design = fs.derive_design();

    HiddenSurvey hs;
    hs.group_ids = fs.group_ids;
    hs.rows.reserve(hidden_sample.member_ids.size());
    for (std::size_t r = 0; r < hidden_sample.member_ids.size(); ++r) {
        const NodeId i = hidden_sample.member_ids[r];
        if (!g.in_hidden[i]) fail(ErrorCode::InvalidArgument, "hidden sample contains a non-hidden node");
        HiddenRow row;
        row.id = "n" + std::to_string(i);
        row.rel_weight = hidden_sample.inclusion_weights[r];
        row.y.assign(t.ties_on_frame.begin() + std::ptrdiff_t(i * G),
                     t.ties_on_frame.begin() + std::ptrdiff_t(i * G + G));
        row.v.assign(t.vis.begin() + std::ptrdiff_t(i * G), t.vis.begin() + std::ptrdiff_t(i * G + G));
        hs.rows.push_back(std::move(row));
    }
    return {std::move(fs), std::move(hs)};
}

inline std::pair<FrameSurvey, HiddenSurvey> synthesize_surveys(const PopulationGraph& g, const DrawnSample& frame_sample,
                                                               const DrawnSample& hidden_sample, const ProbeAssignment& a) {
    return synthesize_surveys(g, frame_sample, hidden_sample, a, network_tables(g, a));
}

// every frame node with weight 1, every hidden node with weight 1
inline DrawnSample census_frame_sample(const PopulationGraph& g) {
    DrawnSample s;
    for (NodeId i = 0; i < g.n; ++i)
        if (g.in_frame[i]) {
            s.member_ids.push_back(i);
            s.inclusion_weights.push_back(1.0);
        }
    return s;
}
inline DrawnSample census_hidden_sample(const PopulationGraph& g) {
    DrawnSample s;
    s.relative_only = true;
    for (NodeId i = 0; i < g.n; ++i)
        if (g.in_hidden[i]) {
            s.member_ids.push_back(i);
            s.inclusion_weights.push_back(1.0);
        }
    return s;
}

struct HarnessOptions {
    ProbeDesign probes;
    double hidden_exponent = 1.0;  // inclusion proportional to degree
    unsigned threads = 1;
};

struct NetworkTruth {
    CensusQuantities census;
    double basic_estimand = 0;
    double generalized_estimand = 0;
    double predicted_bias = 0;
};

struct SurveyRecord {
    std::size_t network = 0, survey = 0;
    double basic = 0, generalized = 0;  // NaN when the survey was degenerate
};

struct CellSummary {
    double true_n_h = 0;
    double mean_basic = 0, sd_basic = 0, se_basic = 0;
    double mean_generalized = 0, sd_generalized = 0, se_generalized = 0;
    double observed_bias = 0;   // mean_basic - N_H
    double predicted_bias = 0;  // mean over networks
    std::size_t excluded_basic = 0, excluded_generalized = 0;
};

struct CellResult {
    SimConfig cfg;
    std::size_t n_networks = 0, n_surveys = 0;
    std::vector<NetworkTruth> networks;
    std::vector<SurveyRecord> surveys;
    CellSummary summary;
};

namespace detail {

inline void mean_sd(const std::vector<double>& x, double& mean, double& sd, double& se, std::size_t& excluded) {
    double s = 0;
    std::size_t n = 0;
    for (double v : x)
        if (std::isfinite(v)) {
            s += v;
            ++n;
        }
    excluded = x.size() - n;
    mean = n ? s / double(n) : std::numeric_limits<double>::quiet_NaN();
    double ss = 0;
    for (double v : x)
        if (std::isfinite(v)) ss += (v - mean) * (v - mean);
    sd = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
    se = n ? sd / std::sqrt(double(n)) : 0.0;
}

}  // namespace detail

inline CellResult run_cell(const SimConfig& cfg, std::size_t n_networks, std::size_t n_surveys, std::size_t frame_n,
                           std::size_t hidden_n, std::uint64_t seed, const HarnessOptions& opt = {}) {
    cfg.validate();
    if (n_networks == 0 || n_surveys == 0) fail(ErrorCode::InvalidArgument, "need at least one network and one survey");
    CellResult res;
    res.cfg = cfg;
    res.n_networks = n_networks;
    res.n_surveys = n_surveys;
    res.networks.resize(n_networks);

    struct Net {
        PopulationGraph g;
        ProbeAssignment probes;
        NetworkTables tables;
    };
    std::vector<Net> nets(n_networks);
    parallel_for(n_networks, opt.threads, [&](std::size_t k) {
        SimConfig c = cfg;
        c.seed = derive(seed, k, 0);
        auto g0 = generate_population(c);
        nets[k].g = apply_transmission_error(g0, cfg.tau, derive(seed, k, 1));
        nets[k].probes = assign_probe_groups(nets[k].g, opt.probes, derive(seed, k, 2));
        nets[k].tables = network_tables(nets[k].g, nets[k].probes);
        auto& t = res.networks[k];
        t.census = census_quantities(nets[k].g);
        t.basic_estimand = basic_estimand(t.census);
        t.generalized_estimand = generalized_estimand(t.census);
        t.predicted_bias = predicted_basic_bias(t.census, t.basic_estimand);
    });

    res.surveys.resize(n_networks * n_surveys);
    parallel_for(n_networks * n_surveys, opt.threads, [&](std::size_t idx) {
        const std::size_t k = idx / n_surveys, s = idx % n_surveys;
        const auto& net = nets[k];
        auto fsamp = srs_from_frame(net.g, frame_n, derive(seed, k, 3, s));
        auto hsamp = relative_sample_from_hidden(net.g, hidden_n, opt.hidden_exponent, derive(seed, k, 4, s));
        auto [fs, hs] = synthesize_surveys(net.g, fsamp, hsamp, net.probes, net.tables);
        SurveyRecord r{k, s, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        try {
            r.basic = basic_scaleup(fs, net.probes.registry, BasicVariant::classic);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateDenominator) throw;
        }
        try {
            r.generalized = generalized_scaleup(fs, hs, net.probes.registry);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateVisibility && e.code() != ErrorCode::DegenerateDenominator) throw;
        }
        res.surveys[idx] = r;
    });

    auto& sm = res.summary;
    std::vector<double> b, gz;
    for (const auto& r : res.surveys) {
        b.push_back(r.basic);
        gz.push_back(r.generalized);
    }
    detail::mean_sd(b, sm.mean_basic, sm.sd_basic, sm.se_basic, sm.excluded_basic);
    detail::mean_sd(gz, sm.mean_generalized, sm.sd_generalized, sm.se_generalized, sm.excluded_generalized);
    for (const auto& t : res.networks) {
        sm.true_n_h += double(t.census.n_h);
        sm.predicted_bias += t.predicted_bias;
    }
    sm.true_n_h /= double(n_networks);
    sm.predicted_bias /= double(n_networks);
    sm.observed_bias = sm.mean_basic - sm.true_n_h;
    return res;
}

// Cartesian grid of SimConfig overrides. Axes are expanded in alphabetical key
// order (the order a JSON object round-trips in), last key varying fastest.
struct Grid {
    SimConfig base;
    std::vector<std::pair<std::string, std::vector<double>>> axes;

    std::vector<SimConfig> cells() const {
        std::vector<SimConfig> out{base};
        auto sorted = axes;
        std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [key, values] : sorted) {
            if (values.empty()) fail(ErrorCode::InvalidConfig, "grid axis " + key + " is empty");
            std::vector<SimConfig> next;
            for (const auto& c : out)
                for (double v : values) {
                    nlohmann::json j;
                    if (key == "n" || key == "seed")
                        j[key] = std::int64_t(v);
                    else
                        j[key] = v;
                    next.push_back(sim_config_from_json(j, c));
                }
            out = std::move(next);
        }
        return out;
    }
};

// rho 0.1..1.0, p_F in {0.1, 0.5, 1}, tau in {0.1, 0.5, 1}; N = 5000,
// p_H = 0.03, p_{F|H} = 1, zeta = 0.05, xi = 0.4
inline Grid default_grid() {
    Grid g;
    g.base = SimConfig{};
    std::vector<double> rho;
    for (int k = 1; k <= 10; ++k) rho.push_back(k / 10.0);
    g.axes = {{"rho", rho}, {"p_frame", {0.1, 0.5, 1.0}}, {"tau", {0.1, 0.5, 1.0}}};
    return g;
}

inline Grid grid_from_json(const nlohmann::json& j) {
    Grid g;
    try {
        if (j.contains("base")) g.base = sim_config_from_json(j["base"]);
        if (j.contains("axes"))
            for (auto it = j["axes"].begin(); it != j["axes"].end(); ++it)
                g.axes.emplace_back(it.key(), it->get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("grid: ") + e.what());
    }
    return g;
}

inline nlohmann::json grid_to_json(const Grid& g) {
    nlohmann::json j{{"schema_version", 1}, {"base", to_json(g.base)}, {"axes", nlohmann::json::object()}};
    for (const auto& [k, v] : g.axes) j["axes"][k] = v;
    return j;
}

struct GridRun {
    std::size_t n_networks = 3, n_surveys = 100, frame_n = 500, hidden_n = 30;
    std::uint64_t seed = 0;
    HarnessOptions options;
};

inline std::vector<CellResult> run_grid(const Grid& grid, const GridRun& run) {
    const auto cells = grid.cells();
    std::vector<CellResult> out;
    out.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
        out.push_back(run_cell(cells[c], run.n_networks, run.n_surveys, run.frame_n, run.hidden_n, derive(run.seed, c),
                               run.options));
    return out;
}

// Long format: two rows (basic, generalized) per cell.
inline void write_grid_csv(const std::vector<CellResult>& cells, std::ostream& os) {
    os << "rho,p_frame,tau,estimator,mean,sd,se,true_n_h,bias,predicted_bias,n_networks,n_surveys,excluded\n";
    os.precision(17);
    for (const auto& c : cells) {
        const auto& s = c.summary;
        auto row = [&](const char* est, double mean, double sd, double se, double pred, std::size_t excl) {
            os << c.cfg.rho << ',' << c.cfg.p_frame << ',' << c.cfg.tau << ',' << est << ',' << mean << ',' << sd << ','
               << se << ',' << s.true_n_h << ',' << (mean - s.true_n_h) << ',' << pred << ',' << c.n_networks << ','
               << c.n_surveys << ',' << excl << '\n';
        };
        row("basic", s.mean_basic, s.sd_basic, s.se_basic, s.predicted_bias, s.excluded_basic);
        row("generalized", s.mean_generalized, s.sd_generalized, s.se_generalized, 0.0, s.excluded_generalized);
    }
}

inline void write_audit_csv(const std::vector<CellResult>& cells, std::ostream& os) {
    os << "cell,network,survey,basic,generalized,basic_estimand,n_h\n";
    os.precision(17);
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (const auto& r : cells[c].surveys)
            os << c << ',' << r.network << ',' << r.survey << ',' << r.basic << ',' << r.generalized << ','
               << cells[c].networks[r.network].basic_estimand << ',' << cells[c].networks[r.network].census.n_h << '\n';
}

}  // namespace nsum

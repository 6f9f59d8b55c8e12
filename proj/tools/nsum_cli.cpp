// nsum: simulate / estimate / bootstrap / sensitivity / check
// exit 0 ok, 2 input validation error, 1 anything else

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nsum/nsum.hpp"

using namespace nsum;
using nlohmann::json;

namespace {

struct InputOpts {
    std::string frame, hidden, registry;
    std::vector<std::string> groups;
    std::optional<Count> top_code;
    bool rescale_weights = false;
};

void add_inputs(CLI::App* app, InputOpts& o, bool hidden_flag = true) {
    app->add_option("--frame", o.frame, "frame survey CSV")->required()->check(CLI::ExistingFile);
    if (hidden_flag) app->add_option("--hidden", o.hidden, "hidden-population survey CSV")->check(CLI::ExistingFile);
    app->add_option("--registry", o.registry, "known-population registry JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--groups", o.groups, "restrict to these probe groups")->delimiter(',');
    app->add_option("--top-code", o.top_code, "cap every count at this value (conventionally 30)");
    app->add_flag("--rescale-weights", o.rescale_weights, "post-stratify frame weights to sum to N_F");
}

struct Loaded {
    KnownPopulationRegistry reg;
    FrameSurvey frame;
    std::optional<HiddenSurvey> hidden;
    std::vector<std::string> warnings;
    std::string digest;
};

void warn(Loaded& l, const std::string& w) {
    std::cerr << "warning: " << w << "\n";
    l.warnings.push_back(w);
}

Loaded load_inputs(const InputOpts& o) {
    Loaded l;
    l.reg = load_registry(o.registry);
    if (!o.groups.empty()) l.reg = l.reg.subset(o.groups);
    l.frame = load_frame_survey(o.frame, l.reg, o.top_code);
    std::vector<std::string> paths{o.frame, o.registry};
    if (!o.hidden.empty()) {
        l.hidden = load_hidden_survey(o.hidden, l.reg, o.top_code);
        paths.push_back(o.hidden);
    }
    l.digest = digest_files(paths);
    if (auto w = weight_scale_warning(l.frame, l.reg.frame_size)) {
        if (o.rescale_weights) {
            l.frame = rescale_to_frame(std::move(l.frame), l.reg.frame_size);
            warn(l, *w + "; rescaled");
        } else {
            warn(l, *w);
        }
    }
    return l;
}

json inputs_json(const InputOpts& o) {
    json j{{"frame", o.frame}, {"registry", o.registry}, {"groups", o.groups}, {"rescale_weights", o.rescale_weights}};
    j["hidden"] = o.hidden.empty() ? json(nullptr) : json(o.hidden);
    j["top_code"] = o.top_code ? json(*o.top_code) : json(nullptr);
    return j;
}

std::map<std::string, double> parse_kv(const std::string& text) {
    std::map<std::string, double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos) fail(ErrorCode::InvalidArgument, "expected key=value in '" + item + "'");
        const std::string k = item.substr(0, eq);
        try {
            std::size_t used = 0;
            const std::string v = item.substr(eq + 1);
            out[k] = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::logic_error&) {
            fail(ErrorCode::InvalidArgument, "bad number for " + k);
        }
    }
    return out;
}

struct MethodOpts {
    std::string method = "generalized";
    std::string factors;
    std::string adjust = "classic";
};

void add_method(CLI::App* app, MethodOpts& m) {
    app->add_option("--method", m.method, "basic | modified | generalized | adjusted")
        ->check(CLI::IsMember({"basic", "modified", "generalized", "adjusted"}));
    app->add_option("--factors", m.factors, "phi=..,delta=..,tau=..,eta=.. (missing ones estimated or assumed 1)");
    app->add_option("--adjust", m.adjust, "classic (phi,delta,tau) | modified (delta,tau) | eta (delta,tau,eta)")
        ->check(CLI::IsMember({"classic", "modified", "eta"}));
}

// Resolve adjustment factors: given values win; delta and tau are estimated
// from the hidden survey when it is present; anything else is assumed 1.
AdjustmentFactors resolve_factors(const MethodOpts& m, const Loaded& l, Weights wf = {}, Weights wh = {}) {
    AdjustmentFactors f;
    auto given = parse_kv(m.factors);
    for (const auto& [k, v] : given)
        if (k != "phi" && k != "delta" && k != "tau" && k != "eta") fail(ErrorCode::InvalidArgument, "unknown factor " + k);
    auto set = [&](const char* k, double& slot, std::function<double()> est) {
        if (auto it = given.find(k); it != given.end()) {
            slot = it->second;
            f.provenance[k] = FactorSource::assumed;
        } else if (est) {
            slot = est();
            f.provenance[k] = FactorSource::estimated;
        } else {
            slot = 1.0;
            f.provenance[k] = FactorSource::assumed;
        }
    };
    const HiddenSurvey* h = l.hidden ? &*l.hidden : nullptr;
    set("phi", f.phi, nullptr);
    set("delta", f.delta, h ? std::function<double()>([&] { return degree_ratio(*h, l.frame, l.reg, wh, wf); }) : nullptr);
    set("tau", f.tau, h ? std::function<double()>([&] { return true_positive_rate(*h, wh); }) : nullptr);
    set("eta", f.eta, nullptr);
    return f;
}

json factors_json(const AdjustmentFactors& f) {
    auto src = [](FactorSource s) { return s == FactorSource::estimated ? "estimated" : s == FactorSource::census ? "census" : "assumed"; };
    json j{{"phi", f.phi}, {"delta", f.delta}, {"tau", f.tau}, {"eta", f.eta}};
    for (const auto& [k, s] : f.provenance) j["provenance"][k] = src(s);
    return j;
}

AdjustVariant adjust_variant(const std::string& s) {
    if (s == "modified") return AdjustVariant::modified_delta_tau;
    if (s == "eta") return AdjustVariant::modified_with_eta;
    return AdjustVariant::classic_phi_delta_tau;
}

// modified basic: d_FF from the groups inside the frame
KnownPopulationRegistry modified_registry(const KnownPopulationRegistry& reg) {
    auto r = reg.inside_frame();
    if (r.groups.empty()) fail(ErrorCode::InvalidRegistry, "modified basic needs probe groups lying entirely inside the frame");
    return r;
}

double point_estimate(const MethodOpts& m, const Loaded& l, Weights wf, const HiddenSurvey* h, Weights wh) {
    if (m.method == "basic") return basic_scaleup(l.frame, l.reg, BasicVariant::classic, wf);
    if (m.method == "modified") return basic_scaleup(l.frame, modified_registry(l.reg), BasicVariant::modified, wf);
    if (m.method == "generalized") {
        if (!h) fail(ErrorCode::InvalidArgument, "--method generalized needs --hidden");
        return generalized_scaleup(l.frame, *h, l.reg, wf, wh);
    }
    const auto v = adjust_variant(m.adjust);
    const double basic = v == AdjustVariant::classic_phi_delta_tau
                             ? basic_scaleup(l.frame, l.reg, BasicVariant::classic, wf)
                             : basic_scaleup(l.frame, modified_registry(l.reg), BasicVariant::modified, wf);
    return adjusted_scaleup(basic, resolve_factors(m, l, wf, wh), v);
}

void write_output(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-")
        std::cout << text;
    else
        write_file(out, text);
}

json base_meta(const std::string& command) {
    return {{"schema_version", kSchemaVersion}, {"command", command}};
}

// ---- subcommands ----

struct SimulateOpts {
    std::string grid, out, audit, export_dir;
    std::size_t networks = 3, surveys = 100, frame_n = 500, hidden_n = 30;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double hidden_exponent = 1.0;
    bool biased = false;
};

void export_example(const Grid& g, const GridRun& run, const std::string& dir) {
    const auto cells = g.cells();
    const SimConfig& cfg = cells.front();
    const std::uint64_t cs = derive(run.seed, 0);
    SimConfig c = cfg;
    c.seed = derive(cs, 0, 0);
    auto graph = apply_transmission_error(generate_population(c), cfg.tau, derive(cs, 0, 1));
    auto probes = assign_probe_groups(graph, run.options.probes, derive(cs, 0, 2));
    auto fsamp = srs_from_frame(graph, run.frame_n, derive(cs, 0, 3, 0));
    auto hsamp = relative_sample_from_hidden(graph, run.hidden_n, run.options.hidden_exponent, derive(cs, 0, 4, 0));
    auto [fs, hs] = synthesize_surveys(graph, fsamp, hsamp, probes);
    std::filesystem::create_directories(dir);
    const auto p = std::filesystem::path(dir);
    save_frame_survey(fs, (p / "frame.csv").string());
    save_hidden_survey(hs, (p / "hidden.csv").string());
    save_registry(probes.registry, (p / "registry.json").string());
    json truth = base_meta("simulate --export-dir");
    const auto cq = census_quantities(graph);
    truth["config"] = to_json(cfg);
    truth["n_h"] = cq.n_h;
    truth["phi"] = cq.phi;
    truth["delta"] = cq.delta;
    truth["tau"] = cq.tau;
    truth["basic_estimand"] = basic_estimand(cq);
    write_file((p / "truth.json").string(), truth.dump(2) + "\n");
}

int run_simulate(const SimulateOpts& o) {
    Grid g = o.grid.empty() ? default_grid() : grid_from_json(parse_json_text(read_file(o.grid), o.grid));
    GridRun run;
    run.n_networks = o.networks;
    run.n_surveys = o.surveys;
    run.frame_n = o.frame_n;
    run.hidden_n = o.hidden_n;
    run.seed = o.seed;
    run.options.threads = resolve_threads(o.threads);
    run.options.hidden_exponent = o.hidden_exponent;
    run.options.probes.biased = o.biased;
    if (!o.export_dir.empty()) {
        export_example(g, run, o.export_dir);
        if (o.out.empty()) return 0;
    }
    if (o.out.empty()) fail(ErrorCode::InvalidArgument, "--out is required unless only --export-dir is given");
    auto cells = run_grid(g, run);
    std::ostringstream os;
    write_grid_csv(cells, os);
    write_output(o.out, os.str());
    if (!o.audit.empty()) {
        std::ostringstream as;
        write_audit_csv(cells, as);
        write_file(o.audit, as.str());
    }
    json meta = base_meta("simulate");
    meta["seed"] = o.seed;
    meta["grid"] = grid_to_json(g);
    meta["networks"] = o.networks;
    meta["surveys"] = o.surveys;
    meta["frame_n"] = o.frame_n;
    meta["hidden_n"] = o.hidden_n;
    meta["hidden_exponent"] = o.hidden_exponent;
    meta["biased_probes"] = o.biased;
    meta["cells"] = cells.size();
    if (o.out != "-") write_file(o.out + ".meta.json", meta.dump(2) + "\n");
    return 0;
}

struct EstimateOpts {
    InputOpts in;
    MethodOpts m;
    std::string out;
};

int run_estimate(const EstimateOpts& o) {
    Loaded l = load_inputs(o.in);
    const HiddenSurvey* h = l.hidden ? &*l.hidden : nullptr;
    Estimate e;
    e.value = point_estimate(o.m, l, {}, h, {});
    e.method = o.m.method;
    e.inputs_digest = l.digest;
    if (auto w = size_warning(e.value, l.reg.frame_size)) warn(l, *w);
    e.metadata = base_meta("estimate");
    e.metadata["inputs"] = inputs_json(o.in);
    e.metadata["method"] = o.m.method;
    if (o.m.method == "adjusted") {
        e.metadata["adjust"] = o.m.adjust;
        e.metadata["factors"] = factors_json(resolve_factors(o.m, l));
    }
    e.metadata["warnings"] = l.warnings;
    write_output(o.out, estimate_to_json(e).dump(2) + "\n");
    return 0;
}

struct BootstrapOpts {
    InputOpts in;
    MethodOpts m;
    std::string out, bootstrap = "simple", hidden_bootstrap = "simple", chain = "marginal";
    std::size_t replicates = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

int run_bootstrap(const BootstrapOpts& o) {
    Loaded l = load_inputs(o.in);
    const HiddenSurvey* h = l.hidden ? &*l.hidden : nullptr;
    Estimate e;
    if (o.bootstrap == "none") {
        // model-based interval, basic estimators only
        e.value = point_estimate(o.m, l, {}, h, {});
        e.method = "killworth";
        if (o.m.method != "basic" && o.m.method != "modified")
            fail(ErrorCode::InvalidArgument, "--bootstrap none gives a Killworth interval for basic/modified only");
        const auto reg = o.m.method == "basic" ? l.reg : modified_registry(l.reg);
        const double na = double(reg.total_size());
        const double N = o.m.method == "basic" ? double(reg.universe_size) : double(reg.frame_size);
        double sum_d = 0;
        for (const auto& r : l.frame.rows) {
            Count y = 0;
            for (const auto& g : reg.groups) y += r.y_probe[*l.frame.column_of(g.id)];
            sum_d += double(y) * N / na;
        }
        auto k = killworth_interval(e.value, sum_d, N, o.level);
        e.interval = Interval{k.low, k.high, k.level};
        e.metadata = base_meta("bootstrap");
        e.metadata["killworth_se"] = k.se;
    } else {
        IntervalSpec spec;
        spec.level = o.level;
        spec.method = o.bootstrap == "rescaled" ? (h ? IntervalMethod::two_sample_boot : IntervalMethod::rescaled_boot)
                                                : IntervalMethod::simple_boot;
        spec.hidden = o.hidden_bootstrap == "rds" ? HiddenResampler::rds : HiddenResampler::simple;
        spec.chain = o.chain == "row_order" ? ChainSource::row_order : ChainSource::marginal;
        EstimatorFn fn = [&](const FrameSurvey&, Weights wf, const HiddenSurvey* hh, Weights wh) {
            return point_estimate(o.m, l, wf, hh, wh);
        };
        e = bootstrap_estimate(fn, l.frame, h, spec, o.replicates, o.seed, resolve_threads(o.threads));
        json boot = e.metadata;
        e.metadata = base_meta("bootstrap");
        e.metadata["bootstrap"] = boot;
    }
    e.inputs_digest = l.digest;
    if (auto w = size_warning(e.value, l.reg.frame_size)) warn(l, *w);
    e.metadata["seed"] = o.seed;
    e.metadata["estimator"] = o.m.method;
    e.metadata["inputs"] = inputs_json(o.in);
    e.metadata["replicates"] = o.replicates;
    e.metadata["level"] = o.level;
    e.metadata["frame_bootstrap"] = o.bootstrap;
    e.metadata["hidden_bootstrap"] = o.hidden_bootstrap;
    e.metadata["chain"] = o.chain;
    if (o.m.method == "adjusted") {
        e.metadata["adjust"] = o.m.adjust;
        e.metadata["factors"] = factors_json(resolve_factors(o.m, l));
    }
    e.metadata["warnings"] = l.warnings;
    write_output(o.out, estimate_to_json(e).dump(2) + "\n");
    return 0;
}

struct SensitivityOpts {
    std::string estimate, grid, out, kind = "auto";
};

int run_sensitivity(const SensitivityOpts& o) {
    const Estimate e = load_estimate(o.estimate);
    std::string kind = o.kind;
    if (kind == "auto") kind = e.method == "generalized" ? "generalized" : "modified_basic";
    const json gj = parse_json_text(read_file(o.grid), o.grid);
    SensitivityScenario base;
    std::vector<std::pair<std::string, std::vector<double>>> axes;
    try {
        if (gj.contains("base")) base = scenario_from_json(gj["base"]);
        if (gj.contains("axes"))
            for (auto it = gj["axes"].begin(); it != gj["axes"].end(); ++it) {
                scenario_field(base, it.key());  // validates the key
                auto v = it->get<std::vector<double>>();
                if (v.empty()) fail(ErrorCode::InvalidArgument, "scenario axis " + it.key() + " is empty");
                axes.emplace_back(it.key(), std::move(v));
            }
    } catch (const json::exception& ex) {
        fail(ErrorCode::Parse, std::string("scenario grid: ") + ex.what());
    }
    double rows = 1;
    for (const auto& a : axes) rows *= double(a.second.size());
    if (rows > 1e6) fail(ErrorCode::InvalidArgument, "scenario grid has more than 1e6 rows");

    std::ostringstream os;
    os.precision(17);
    for (const auto& k : scenario_keys()) os << k << ',';
    os << "estimate,implied_n_h\n";
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t r = 0; r < std::size_t(rows); ++r) {
        SensitivityScenario s = base;
        for (std::size_t a = 0; a < axes.size(); ++a) scenario_field(s, axes[a].first) = axes[a].second[idx[a]];
        const double implied = kind == "generalized" ? adjust_generalized(e.value, s) : adjust_modified_basic(e.value, s);
        for (const auto& k : scenario_keys()) os << scenario_field(s, k) << ',';
        os << e.value << ',' << implied << '\n';
        for (std::size_t a = axes.size(); a-- > 0;) {
            if (++idx[a] < axes[a].second.size()) break;
            idx[a] = 0;
        }
    }
    write_output(o.out, os.str());
    if (!o.out.empty() && o.out != "-") {
        json meta = base_meta("sensitivity");
        meta["estimate"] = o.estimate;
        meta["scenario_grid"] = gj;
        meta["adjustment"] = kind;
        meta["rows"] = std::size_t(rows);
        write_file(o.out + ".meta.json", meta.dump(2) + "\n");
    }
    return 0;
}

struct CheckOpts {
    InputOpts in;
    std::string out, method = "basic";
};

int run_probe_alters(const CheckOpts& o) {
    Loaded l = load_inputs(o.in);
    auto c = probe_alter_check(l.frame);
    json j = base_meta("check probe-alters");
    j["inputs"] = inputs_json(o.in);
    j["inputs_digest"] = l.digest;
    j["mean_y_F_to_H"] = c.mean_y_F_to_H;
    j["mean_y_probemembers_to_H"] = c.mean_y_probemembers_to_H;
    j["difference"] = c.difference;
    j["warnings"] = l.warnings;
    write_output(o.out, j.dump(2) + "\n");
    return 0;
}

int run_internal_consistency(const CheckOpts& o) {
    Loaded l = load_inputs(o.in);
    auto rows = o.method == "modified" ? internal_consistency(l.frame, modified_registry(l.reg), BasicVariant::modified)
                                       : internal_consistency(l.frame, l.reg, BasicVariant::classic);
    json j = base_meta("check internal-consistency");
    j["inputs"] = inputs_json(o.in);
    j["inputs_digest"] = l.digest;
    j["method"] = o.method;
    j["groups"] = json::array();
    for (const auto& r : rows) j["groups"].push_back({{"group_id", r.group_id}, {"known_size", r.known_size}, {"estimate", r.estimate}});
    j["warnings"] = l.warnings;
    write_output(o.out, j.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"network scale-up estimation and simulation"};
    app.require_subcommand(1);

    SimulateOpts so;
    auto* sim = app.add_subcommand("simulate", "run the simulation grid and write per-cell CSV");
    sim->add_option("--grid", so.grid, "grid JSON {base:{...}, axes:{key:[...]}}; default grid if omitted")->check(CLI::ExistingFile);
    sim->add_option("--out", so.out, "cells CSV");
    sim->add_option("--networks", so.networks)->capture_default_str();
    sim->add_option("--surveys", so.surveys)->capture_default_str();
    sim->add_option("--frame-n", so.frame_n)->capture_default_str();
    sim->add_option("--hidden-n", so.hidden_n)->capture_default_str();
    sim->add_option("--hidden-exponent", so.hidden_exponent, "hidden inclusion proportional to degree^x")->capture_default_str();
    sim->add_flag("--biased-probes", so.biased, "assign probe groups to the highest-degree nodes");
    sim->add_option("--seed", so.seed)->required();
    sim->add_option("--threads", so.threads, "0 = all cores")->capture_default_str();
    sim->add_option("--audit", so.audit, "per-survey CSV");
    sim->add_option("--export-dir", so.export_dir, "write one synthetic frame/hidden/registry triple from the first cell");

    EstimateOpts eo;
    auto* est = app.add_subcommand("estimate", "point estimate of N_H");
    add_inputs(est, eo.in);
    add_method(est, eo.m);
    est->add_option("--out", eo.out, "Estimate JSON (stdout if omitted)");

    BootstrapOpts bo;
    auto* boot = app.add_subcommand("bootstrap", "point estimate with a percentile or Killworth interval");
    add_inputs(boot, bo.in);
    add_method(boot, bo.m);
    boot->add_option("--bootstrap", bo.bootstrap, "none | simple | rescaled")->check(CLI::IsMember({"none", "simple", "rescaled"}));
    boot->add_option("--hidden-bootstrap", bo.hidden_bootstrap, "simple | rds")->check(CLI::IsMember({"simple", "rds"}));
    boot->add_option("--chain", bo.chain, "rds transition source: marginal | row_order")
        ->check(CLI::IsMember({"marginal", "row_order"}));
    boot->add_option("--replicates", bo.replicates)->capture_default_str();
    boot->add_option("--level", bo.level)->capture_default_str();
    boot->add_option("--seed", bo.seed)->required();
    boot->add_option("--threads", bo.threads)->capture_default_str();
    boot->add_option("--out", bo.out);

    SensitivityOpts se;
    auto* sens = app.add_subcommand("sensitivity", "implied N_H over a grid of sensitivity scenarios");
    sens->add_option("--estimate", se.estimate)->required()->check(CLI::ExistingFile);
    sens->add_option("--scenario-grid", se.grid)->required()->check(CLI::ExistingFile);
    sens->add_option("--adjustment", se.kind, "auto | generalized | modified_basic")
        ->check(CLI::IsMember({"auto", "generalized", "modified_basic"}));
    sens->add_option("--out", se.out);

    auto* check = app.add_subcommand("check", "diagnostics");
    check->require_subcommand(1);
    CheckOpts pa, ic;
    auto* pac = check->add_subcommand("probe-alters", "compare mean reports to H over everyone and over probe members");
    add_inputs(pac, pa.in, false);
    pac->add_option("--out", pa.out);
    auto* icc = check->add_subcommand("internal-consistency", "leave-one-group-out size estimates");
    add_inputs(icc, ic.in, false);
    icc->add_option("--method", ic.method)->check(CLI::IsMember({"basic", "modified"}));
    icc->add_option("--out", ic.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*sim) return run_simulate(so);
        if (*est) return run_estimate(eo);
        if (*boot) return run_bootstrap(bo);
        if (*sens) return run_sensitivity(se);
        if (*pac) return run_probe_alters(pa);
        if (*icc) return run_internal_consistency(ic);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_validation() ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

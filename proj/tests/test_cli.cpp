#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "nsum/nsum.hpp"

using namespace nsum;
using nlohmann::json;

namespace {

const std::string kCli = NSUM_CLI_PATH;
const std::string kSamples = NSUM_SAMPLES_DIR;

std::filesystem::path scratch() {
    auto p = std::filesystem::temp_directory_path() / "nsum_cli_tests";
    std::filesystem::create_directories(p);
    return p;
}

std::string sample(const std::string& f) { return kSamples + "/" + f; }
std::string tmp(const std::string& f) { return (scratch() / f).string(); }

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > " + tmp("stdout.txt") + " 2> " + tmp("stderr.txt");
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

json read_json(const std::string& path) { return json::parse(read_file(path)); }

std::string inputs(bool hidden = true) {
    std::string s = "--frame " + sample("frame.csv") + " --registry " + sample("registry.json");
    if (hidden) s += " --hidden " + sample("hidden.csv");
    return s;
}

std::size_t lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

}  // namespace

TEST(Cli, EstimateGeneralizedMatchesLibrary) {
    ASSERT_EQ(run("estimate --method generalized " + inputs() + " --out " + tmp("g.json")), 0);
    const auto j = read_json(tmp("g.json"));
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["method"], "generalized");
    EXPECT_EQ(j["metadata"]["inputs"]["frame"], sample("frame.csv"));
    EXPECT_EQ(j["inputs_digest"].get<std::string>().rfind("fnv1a64:", 0), 0u);
    const auto reg = load_registry(sample("registry.json"));
    const auto f = load_frame_survey(sample("frame.csv"), reg);
    const auto h = load_hidden_survey(sample("hidden.csv"), reg);
    EXPECT_EQ(j["value"].get<double>(), generalized_scaleup(f, h, reg));
}

TEST(Cli, AdjustedModifiedBasicEqualsGeneralizedWithEstimatedFactors) {
    ASSERT_EQ(run("estimate --method generalized " + inputs() + " --out " + tmp("g.json")), 0);
    ASSERT_EQ(run("estimate --method adjusted --adjust modified " + inputs() + " --out " + tmp("a.json")), 0);
    const auto a = read_json(tmp("a.json")), g = read_json(tmp("g.json"));
    EXPECT_NEAR(a["value"].get<double>(), g["value"].get<double>(), 1e-9 * g["value"].get<double>());
    EXPECT_EQ(a["metadata"]["factors"]["provenance"]["delta"], "estimated");
    EXPECT_EQ(a["metadata"]["factors"]["provenance"]["phi"], "assumed");
}

TEST(Cli, FactorsFlag) {
    ASSERT_EQ(run("estimate --method basic " + inputs(false) + " --out " + tmp("b.json")), 0);
    ASSERT_EQ(run("estimate --method adjusted --factors phi=2,delta=0.5,tau=0.25 " + inputs(false) + " --out " + tmp("a.json")), 0);
    EXPECT_NEAR(read_json(tmp("a.json"))["value"].get<double>(), read_json(tmp("b.json"))["value"].get<double>() * 4, 1e-9);
    EXPECT_EQ(run("estimate --method adjusted --factors phi=x " + inputs(false)), 2);
    EXPECT_EQ(run("estimate --method adjusted --factors tau=1.5 " + inputs(false)), 2);
}

TEST(Cli, ValidationErrorsExitTwo) {
    EXPECT_EQ(run("estimate --method generalized " + inputs(false)), 2);
    EXPECT_NE(read_file(tmp("stderr.txt")).find("InvalidArgument"), std::string::npos);
    EXPECT_EQ(run("estimate --frame /nonexistent.csv --registry " + sample("registry.json")), 2);
    EXPECT_EQ(run("nosuchcommand"), 2);
    EXPECT_EQ(run("bootstrap " + inputs()), 2);  // --seed is mandatory
    write_file(tmp("bad_registry.json"), "{\"groups\": [");
    EXPECT_EQ(run("estimate --frame " + sample("frame.csv") + " --registry " + tmp("bad_registry.json")), 2);
    write_file(tmp("bad_frame.csv"), "id,weight,stratum,psu,y_hidden\nr1,0,s,p,1\n");
    EXPECT_EQ(run("estimate --method basic --frame " + tmp("bad_frame.csv") + " --registry " + sample("registry.json")), 2);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, BootstrapIsThreadInvariantAndEchoesSeed) {
    const std::string common = "bootstrap --method generalized --bootstrap rescaled --replicates 300 --seed 11 " + inputs();
    ASSERT_EQ(run(common + " --threads 1 --out " + tmp("t1.json")), 0);
    ASSERT_EQ(run(common + " --threads 3 --out " + tmp("t3.json")), 0);
    EXPECT_EQ(read_file(tmp("t1.json")), read_file(tmp("t3.json")));
    const auto j = read_json(tmp("t1.json"));
    EXPECT_EQ(j["metadata"]["seed"], 11);
    EXPECT_EQ(j["replicates"].size(), 300u);
    EXPECT_EQ(j["excluded_replicates"], 0);
    EXPECT_LE(j["interval"]["low"].get<double>(), j["value"].get<double>());
    EXPECT_GE(j["interval"]["high"].get<double>(), j["value"].get<double>());
}

TEST(Cli, BootstrapVariants) {
    ASSERT_EQ(run("bootstrap --method generalized --hidden-bootstrap rds --chain row_order --replicates 100 --seed 2 " + inputs() +
                  " --out " + tmp("r.json")),
              0);
    EXPECT_EQ(read_json(tmp("r.json"))["metadata"]["bootstrap"]["hidden_resampler"], "rds");
    ASSERT_EQ(run("bootstrap --method basic --bootstrap none --seed 2 " + inputs(false) + " --out " + tmp("k.json")), 0);
    const auto k = read_json(tmp("k.json"));
    EXPECT_EQ(k["method"], "killworth");
    EXPECT_NEAR(k["interval"]["high"].get<double>() - k["value"].get<double>(),
                k["value"].get<double>() - k["interval"]["low"].get<double>(), 1e-9);
}

TEST(Cli, SimulateWritesCsvAndMetadata) {
    const std::string common = "simulate --grid " + sample("grid_small.json") + " --networks 1 --surveys 4 --frame-n 100 --hidden-n 10 --seed 5";
    ASSERT_EQ(run(common + " --threads 1 --out " + tmp("c1.csv") + " --audit " + tmp("audit.csv")), 0);
    ASSERT_EQ(run(common + " --threads 2 --out " + tmp("c2.csv")), 0);
    const auto csv = read_file(tmp("c1.csv"));
    EXPECT_EQ(csv, read_file(tmp("c2.csv")));
    EXPECT_EQ(lines(csv), 1u + 2 * 4);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "rho,p_frame,tau,estimator,mean,sd,se,true_n_h,bias,predicted_bias,n_networks,n_surveys,excluded");
    EXPECT_EQ(lines(read_file(tmp("audit.csv"))), 1u + 4 * 4);
    const auto meta = read_json(tmp("c1.csv") + ".meta.json");
    EXPECT_EQ(meta["seed"], 5);
    EXPECT_EQ(meta["schema_version"], 1);
    EXPECT_EQ(meta["cells"], 4);
    EXPECT_EQ(run("simulate --out " + tmp("x.csv")), 2);  // no seed
}

TEST(Cli, SimulateExportRoundTripsThroughEstimate) {
    write_file(tmp("one.json"), R"({"base": {"n": 1000}, "axes": {}})");
    const auto dir = tmp("export");
    ASSERT_EQ(run("simulate --grid " + tmp("one.json") + " --frame-n 200 --hidden-n 20 --seed 3 --export-dir " + dir), 0);
    ASSERT_EQ(run("estimate --method generalized --frame " + dir + "/frame.csv --hidden " + dir + "/hidden.csv --registry " + dir +
                  "/registry.json --out " + tmp("e.json")),
              0);
    EXPECT_GT(read_json(tmp("e.json"))["value"].get<double>(), 0.0);
    EXPECT_EQ(read_json(dir + "/truth.json")["n_h"], 30);
}

TEST(Cli, SensitivityGrid) {
    ASSERT_EQ(run("estimate --method generalized " + inputs() + " --out " + tmp("g.json")), 0);
    ASSERT_EQ(run("sensitivity --estimate " + tmp("g.json") + " --scenario-grid " + sample("scenarios.json") + " --out " + tmp("s.csv")), 0);
    const auto csv = read_file(tmp("s.csv"));
    EXPECT_EQ(lines(csv), 1u + 3 * 2 * 2);
    EXPECT_EQ(read_json(tmp("s.csv") + ".meta.json")["adjustment"], "generalized");
    write_file(tmp("huge.json"), R"({"axes": {"c1": [1,2,3,4,5,6,7,8,9,10], "c2": [1,2,3,4,5,6,7,8,9,10],
        "c3": [1,2,3,4,5,6,7,8,9,10], "K_H": [0,1,2,3,4,5,6,7,8,9], "K_F1": [0,1,2,3,4,5,6,7,8,9], "K_F2": [0,1,2,3,4,5,6,7,8,9], "eta": [0.5,1]}})");
    EXPECT_EQ(run("sensitivity --estimate " + tmp("g.json") + " --scenario-grid " + tmp("huge.json")), 2);
    write_file(tmp("badkey.json"), R"({"axes": {"c9": [1]}})");
    EXPECT_EQ(run("sensitivity --estimate " + tmp("g.json") + " --scenario-grid " + tmp("badkey.json")), 2);
}

TEST(Cli, Checks) {
    ASSERT_EQ(run("check probe-alters " + inputs(false) + " --out " + tmp("p.json")), 0);
    const auto p = read_json(tmp("p.json"));
    EXPECT_NEAR(p["difference"].get<double>(),
                p["mean_y_F_to_H"].get<double>() - p["mean_y_probemembers_to_H"].get<double>(), 1e-12);
    ASSERT_EQ(run("check internal-consistency " + inputs(false) + " --out " + tmp("ic.json")), 0);
    EXPECT_EQ(read_json(tmp("ic.json"))["groups"].size(), 8u);
    EXPECT_EQ(run("check"), 2);
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <json.hpp>

#include "ids_script.hpp"
#include "iotscope/snort.hpp"
#include "support.hpp"

using namespace iotscope;
using namespace iotscope::testing;

namespace {

struct Run {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Run run_cli(const TempDir& dir, const std::vector<std::string>& args) {
    std::string cmd = quote(IOTSCOPE_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
    const int status = std::system(cmd.c_str());
    Run r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

const std::string kExampleDb = std::string(IOTSCOPE_SOURCE_DIR) + "/data/signatures.example.json";

}  // namespace

TEST(Cli, HelpForEverySubcommand) {
    TempDir dir("cli-help");
    const std::vector<std::vector<std::string>> commands = {
        {"--help"},          {"extract", "--help"},      {"split", "--help"},
        {"train", "--help"}, {"eval", "--help"},         {"grid-search", "--help"},
        {"rules", "--help"}, {"rules", "gen", "--help"}, {"rules", "match", "--help"},
        {"dns-report", "--help"}, {"synth", "--help"},   {"synth", "corpus", "--help"},
        {"synth", "pcap", "--help"}};
    for (const auto& c : commands) {
        const auto r = run_cli(dir, c);
        EXPECT_EQ(r.exit_code, 0) << c.front();
        EXPECT_NE(r.out.find("Usage"), std::string::npos) << c.front();
    }
}

TEST(Cli, UsageErrorsExitTwo) {
    TempDir dir("cli-usage");
    EXPECT_EQ(run_cli(dir, {}).exit_code, 2);
    EXPECT_EQ(run_cli(dir, {"frobnicate"}).exit_code, 2);
    EXPECT_EQ(run_cli(dir, {"split", "--in", "missing.csv"}).exit_code, 2);
    write_file(dir / "x.csv", "");
    const auto bad_kind = run_cli(dir, {"train", "--model", "svm", "--train", (dir / "x.csv").string(),
                                        "--out", (dir / "m.json").string()});
    EXPECT_EQ(bad_kind.exit_code, 2);
    EXPECT_NE(bad_kind.err.find("usage error"), std::string::npos);
}

TEST(Cli, DomainErrorsExitOne) {
    TempDir dir("cli-domain");
    write_bytes(dir / "bad.pcap", {1, 2, 3, 4, 5, 6, 7, 8});
    const auto r = run_cli(dir, {"extract", (dir / "bad.pcap").string(), "--label", "Hub", "--out",
                                 (dir / "o.csv").string()});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("MalformedPcap"), std::string::npos) << r.err;
}

TEST(Cli, ExtractEmptyCaptureWritesHeaderOnly) {
    TempDir dir("cli-empty");
    write_bytes(dir / "empty.pcap", pcap_global_header());
    const auto r = run_cli(dir, {"extract", (dir / "empty.pcap").string(), "--label", "Hub", "--out",
                                 (dir / "o.csv").string()});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto csv = read_file(dir / "o.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
    EXPECT_EQ(csv.rfind("flow_duration,", 0), 0u);
    EXPECT_NE(csv.find(",label\n"), std::string::npos);
}

TEST(Cli, FullPipeline) {
    TempDir dir("cli-pipeline");
    const auto corpus = (dir / "corpus").string();
    ASSERT_EQ(run_cli(dir, {"synth", "corpus", "--seed", "3", "--per-category", "2", "--duration", "30",
                            "--out", corpus}).exit_code, 0);
    ASSERT_EQ(run_cli(dir, {"extract", "--manifest", corpus + "/manifest.csv", "--out",
                            (dir / "all.csv").string()}).exit_code, 0);
    const auto split = run_cli(dir, {"split", "--in", (dir / "all.csv").string(), "--train",
                                     (dir / "train.csv").string(), "--test", (dir / "test.csv").string()});
    ASSERT_EQ(split.exit_code, 0) << split.err;
    EXPECT_EQ(split.out.rfind("train ", 0), 0u);

    const auto train = run_cli(dir, {"train", "--model", "rf", "--train", (dir / "train.csv").string(),
                                     "--param", "n_trees=20", "--out", (dir / "rf.json").string()});
    ASSERT_EQ(train.exit_code, 0) << train.err;
    const auto eval = run_cli(dir, {"eval", "--model", (dir / "rf.json").string(), "--test",
                                    (dir / "test.csv").string(), "--report", (dir / "report.json").string()});
    ASSERT_EQ(eval.exit_code, 0) << eval.err;
    EXPECT_EQ(eval.out.rfind("accuracy: ", 0), 0u);
    const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
    EXPECT_GE(report.at("accuracy").get<double>(), 0.0);
    EXPECT_LE(report.at("accuracy").get<double>(), 1.0);

    const auto grid = run_cli(dir, {"grid-search", "--model", "knn", "--train", (dir / "train.csv").string(),
                                    "--folds", "2", "--grid", "k=1,3", "--out", (dir / "grid.json").string()});
    ASSERT_EQ(grid.exit_code, 0) << grid.err;
    EXPECT_NE(grid.out.find("*"), std::string::npos);
    EXPECT_EQ(nlohmann::json::parse(read_file(dir / "grid.json")).at("table").size(), 2u);
}

TEST(Cli, TrainDefaultsTo200TreeForest) {
    TempDir dir("cli-rf");
    ASSERT_EQ(run_cli(dir, {"synth", "corpus", "--seed", "1", "--per-category", "1", "--duration", "20",
                            "--out", (dir / "c").string()}).exit_code, 0);
    ASSERT_EQ(run_cli(dir, {"extract", "--manifest", (dir / "c" / "manifest.csv").string(), "--out",
                            (dir / "all.csv").string()}).exit_code, 0);
    ASSERT_EQ(run_cli(dir, {"train", "--model", "rf", "--train", (dir / "all.csv").string(), "--out",
                            (dir / "rf.json").string()}).exit_code, 0);
    const auto model = nlohmann::json::parse(read_file(dir / "rf.json"));
    EXPECT_EQ(model.at("params").at("n_trees"), 200);
    EXPECT_EQ(model.at("params").at("max_features"), 63);
    EXPECT_EQ(model.at("payload").at("trees").size(), 200u);
}

TEST(Cli, ConfigFileOverridesDefaults) {
    TempDir dir("cli-config");
    write_file(dir / "cfg.json", R"({"models": {"knn": {"k": 3}}})");
    ASSERT_EQ(run_cli(dir, {"synth", "corpus", "--seed", "1", "--per-category", "1", "--duration", "20",
                            "--out", (dir / "c").string()}).exit_code, 0);
    ASSERT_EQ(run_cli(dir, {"extract", "--manifest", (dir / "c" / "manifest.csv").string(), "--out",
                            (dir / "all.csv").string()}).exit_code, 0);
    ASSERT_EQ(run_cli(dir, {"--config", (dir / "cfg.json").string(), "train", "--model", "knn", "--train",
                            (dir / "all.csv").string(), "--out", (dir / "knn.json").string()}).exit_code, 0);
    EXPECT_EQ(nlohmann::json::parse(read_file(dir / "knn.json")).at("params").at("k"), 3);
    write_file(dir / "bad.json", R"({"modles": {}})");
    EXPECT_EQ(run_cli(dir, {"--config", (dir / "bad.json").string(), "train", "--model", "knn", "--train",
                            (dir / "all.csv").string(), "--out", (dir / "knn.json").string()}).exit_code, 1);
}

TEST(Cli, RulesAndDnsReport) {
    TempDir dir("cli-rules");
    const auto rules = (dir / "rules.rules").string();
    ASSERT_EQ(run_cli(dir, {"rules", "gen", "--db", kExampleDb, "--out", rules}).exit_code, 0);
    EXPECT_EQ(parse_rules(rules).size(), example_sid::rule_count);

    const auto script = build_ids_script();
    write_bytes(dir / "ids.pcap", script.pcap);
    const auto alerts_path = (dir / "alerts.log").string();
    const auto match = run_cli(dir, {"rules", "match", "--rules", rules, "--pcap", (dir / "ids.pcap").string(),
                                     "--alerts", alerts_path, "--db", kExampleDb});
    ASSERT_EQ(match.exit_code, 0) << match.err;
    const auto log = read_file(alerts_path);
    EXPECT_EQ(static_cast<std::size_t>(std::count(log.begin(), log.end(), '\n')), script.expected.size());
    EXPECT_NE(log.find("[sid:1000001] Hub/Playing music or radio {UDP}"), std::string::npos);
    EXPECT_EQ(match.out, std::to_string(script.expected.size()) + " alerts\n");

    ASSERT_EQ(run_cli(dir, {"synth", "pcap", "--category", "Hub", "--mode", "passive", "--duration", "900",
                            "--seed", "2", "--out", (dir / "hub.pcap").string()}).exit_code, 0);
    const auto report = run_cli(dir, {"dns-report", "--pcap", (dir / "hub.pcap").string()});
    ASSERT_EQ(report.exit_code, 0);
    EXPECT_EQ(report.out.rfind("qname,queries,distinct_sources\nheartbeat.hub.example.com,", 0), 0u) << report.out;
}

TEST(Cli, DeterministicArtifacts) {
    TempDir a("cli-det-a"), b("cli-det-b");
    for (const TempDir* d : {&a, &b}) {
        ASSERT_EQ(run_cli(*d, {"synth", "corpus", "--seed", "5", "--per-category", "1", "--duration", "20",
                               "--out", (*d / "c").string()}).exit_code, 0);
        ASSERT_EQ(run_cli(*d, {"extract", "--manifest", (*d / "c" / "manifest.csv").string(), "--out",
                               (*d / "all.csv").string()}).exit_code, 0);
        ASSERT_EQ(run_cli(*d, {"train", "--model", "mlp", "--param", "max_epochs=5", "--train",
                               (*d / "all.csv").string(), "--out", (*d / "mlp.json").string()}).exit_code, 0);
    }
    EXPECT_EQ(read_file(a / "all.csv"), read_file(b / "all.csv"));
    EXPECT_EQ(read_file(a / "mlp.json"), read_file(b / "mlp.json"));
}

// iotscope: command-line front end for the traffic classification and
// signature toolkit.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iotscope/config.hpp"
#include "iotscope/dataset.hpp"
#include "iotscope/eval.hpp"
#include "iotscope/features.hpp"
#include "iotscope/model.hpp"
#include "iotscope/pcap.hpp"
#include "iotscope/snort.hpp"
#include "iotscope/synth.hpp"

namespace fs = std::filesystem;
using namespace iotscope;

namespace {

constexpr int kExitDomainError = 1;
constexpr int kExitUsageError = 2;

// Flag combinations CLI11 cannot express on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

ModelKind model_kind_arg(const std::string& name) {
    const auto kind = parse_model_kind(name);
    if (!kind) throw UsageError("--model: expected rf, mlp or knn, got '" + name + "'");
    return *kind;
}

std::pair<std::string, std::string> split_assignment(const std::string& text, const char* flag) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw UsageError(std::string(flag) + ": expected name=value, got '" + text + "'");
    }
    return {text.substr(0, eq), text.substr(eq + 1)};
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');) out.push_back(item);
    return out;
}

struct Global {
    std::string config_path;

    Config config() const {
        return config_path.empty() ? load_config_from_env() : load_config(config_path);
    }
};

// extract ------------------------------------------------------------------

struct ExtractArgs {
    std::vector<std::string> pcaps;
    std::string label;
    std::string manifest;
    std::string device_map;
    std::string out;
};

void run_extract(const Global& g, const ExtractArgs& a) {
    const Config cfg = g.config();
    const int modes = !a.label.empty() + !a.manifest.empty() + !a.device_map.empty();
    if (modes > 1) throw UsageError("--label, --manifest and --device-map are mutually exclusive");
    if (!a.manifest.empty() && !a.pcaps.empty()) {
        throw UsageError("--manifest: pcap arguments come from the manifest");
    }
    if (a.manifest.empty() && a.pcaps.empty()) throw UsageError("no pcap files given");

    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + a.out);
    std::size_t skipped = 0;

    if (modes == 0) {
        write_feature_csv_header(out, false);
        for (const auto& p : a.pcaps) {
            const auto ex = extract_flows(p, cfg.flow);
            skipped += ex.skipped_frames;
            for (const auto& f : ex.flows) write_feature_csv_row(out, f.features, std::nullopt);
        }
    } else {
        Dataset ds;
        if (!a.label.empty()) {
            const auto label = parse_category(a.label);
            if (!label) throw UsageError("--label: unknown category '" + a.label + "'");
            for (const auto& p : a.pcaps) {
                const auto ex = extract_flows(p, cfg.flow);
                skipped += ex.skipped_frames;
                std::vector<FeatureVector> fv;
                for (const auto& f : ex.flows) fv.push_back(f.features);
                ds.append(label_flows(fv, *label, fs::path(p).filename().string()));
            }
        } else if (!a.manifest.empty()) {
            const fs::path dir = fs::path(a.manifest).parent_path();
            for (const auto& row : load_manifest(a.manifest)) {
                const auto ex = extract_flows(dir / row.file, cfg.flow);
                skipped += ex.skipped_frames;
                std::vector<FeatureVector> fv;
                for (const auto& f : ex.flows) fv.push_back(f.features);
                ds.append(label_flows(fv, row.label, row.file));
            }
        } else {
            const auto map = load_device_map(a.device_map);
            for (const auto& p : a.pcaps) {
                const auto ex = extract_flows(p, cfg.flow);
                skipped += ex.skipped_frames;
                ds.append(label_by_device_map(ex, map, fs::path(p).filename().string()));
            }
        }
        write_feature_csv_header(out, true);
        for (const auto& s : ds.samples) {
            write_feature_csv_row(out, s.features, category_name(s.label));
        }
    }
    if (!out) throw IoError("write failed: " + a.out);
    if (skipped > 0) std::cerr << "warning: skipped " << skipped << " undecodable frames\n";
}

// split --------------------------------------------------------------------

struct SplitArgs {
    std::string in, train, test;
    std::optional<double> fraction;
    std::optional<std::uint64_t> seed;
};

void run_split(const Global& g, const SplitArgs& a) {
    const Config cfg = g.config();
    const auto ds = load_dataset_csv(a.in);
    const auto result = stratified_split(ds, a.fraction.value_or(cfg.split_fraction),
                                         a.seed.value_or(cfg.split_seed));
    save_dataset_csv(result.train, a.train);
    save_dataset_csv(result.test, a.test);
    std::cout << "train " << result.train.size() << ", test " << result.test.size() << '\n';
}

// train --------------------------------------------------------------------

struct TrainArgs {
    std::string model, train, out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> params;
};

void run_train(const Global& g, const TrainArgs& a) {
    const Config cfg = g.config();
    ModelParams params = cfg.params(model_kind_arg(a.model));
    for (const auto& p : a.params) {
        const auto [name, value] = split_assignment(p, "--param");
        set_param(params, name, value);
    }
    if (a.seed) set_seed(params, *a.seed);
    const auto ds = load_dataset_csv(a.train);
    save_model(iotscope::train(ds, params), a.out);
}

// eval ---------------------------------------------------------------------

struct EvalArgs {
    std::string model, test, report;
};

void run_eval(const Global&, const EvalArgs& a) {
    const auto model = load_model(a.model);
    const auto ds = load_dataset_csv(a.test);
    if (ds.empty()) throw EmptyDataset("test set " + a.test + " has no samples");
    const auto report = evaluate(predict_all(model, ds), ds.labels());
    if (!a.report.empty()) write_text(a.report, report_to_json(report));
    print_report(std::cout, report);
}

// grid-search --------------------------------------------------------------

struct GridArgs {
    std::string model, train, out;
    std::optional<std::size_t> folds;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> grid;
};

void run_grid(const Global& g, const GridArgs& a) {
    const Config cfg = g.config();
    GridSpec spec;
    spec.model_kind = model_kind_arg(a.model);
    spec.base = cfg.params(spec.model_kind);
    spec.grid = cfg.grid(spec.model_kind);
    spec.folds = a.folds.value_or(cfg.folds);
    spec.seed = a.seed.value_or(cfg.split_seed);
    if (!a.grid.empty()) {
        spec.grid.clear();
        for (const auto& item : a.grid) {
            const auto [name, values] = split_assignment(item, "--grid");
            spec.grid[name] = split_list(values);
        }
    }
    const auto ds = load_dataset_csv(a.train);
    const auto result = grid_search(ds, spec);

    nlohmann::json table = nlohmann::json::array();
    for (std::size_t i = 0; i < result.table.size(); ++i) {
        const auto& row = result.table[i];
        std::string point;
        for (const auto& [name, value] : row.point) {
            if (!point.empty()) point += ' ';
            point += name + '=' + value;
        }
        std::printf("%c %-40s %.6f\n", i == result.best_index ? '*' : ' ', point.c_str(),
                    row.mean_accuracy);
        table.push_back({{"params", row.point}, {"mean_accuracy", row.mean_accuracy}});
    }
    if (!a.out.empty()) {
        nlohmann::json j{{"model_kind", model_kind_name(spec.model_kind)},
                         {"folds", spec.folds},
                         {"seed", spec.seed},
                         {"table", std::move(table)},
                         {"best_index", result.best_index},
                         {"best_params", describe_params(result.best_params)}};
        write_text(a.out, j.dump(2) + "\n");
    }
}

// rules --------------------------------------------------------------------

struct RulesGenArgs {
    std::string db, out;
};

void run_rules_gen(const Global&, const RulesGenArgs& a) {
    const auto db = load_signature_db(a.db);
    write_text(a.out, render_rules(generate_rules(db).rules));
}

struct RulesMatchArgs {
    std::string rules, pcap, alerts, db;
};

void run_rules_match(const Global&, const RulesMatchArgs& a) {
    const RuleSet rules(parse_rules(a.rules));
    std::map<std::uint32_t, std::string> sid_to_entry;
    if (!a.db.empty()) sid_to_entry = generate_rules(load_signature_db(a.db)).sid_to_entry;
    const auto packets = read_pcap(a.pcap).packets;
    std::string log;
    const auto alerts = match_rules(packets, rules, sid_to_entry);
    for (const auto& alert : alerts) log += format_alert(alert) + '\n';
    write_text(a.alerts, log);
    std::cout << alerts.size() << " alerts\n";
}

struct DnsReportArgs {
    std::string pcap, out;
};

void run_dns_report(const Global&, const DnsReportArgs& a) {
    std::string csv = "qname,queries,distinct_sources\n";
    for (const auto& row : dns_frequency_report(read_pcap(a.pcap).packets)) {
        csv += row.qname + ',' + std::to_string(row.queries) + ',' +
               std::to_string(row.distinct_sources) + '\n';
    }
    if (a.out.empty()) {
        std::cout << csv;
    } else {
        write_text(a.out, csv);
    }
}

// synth --------------------------------------------------------------------

struct SynthCorpusArgs {
    std::uint64_t seed = 0;
    int per_category = 5;
    std::string out;
    double duration = kDefaultCaptureDurationS;
};

void run_synth_corpus(const Global& g, const SynthCorpusArgs& a) {
    const Config cfg = g.config();
    const auto rows =
        generate_corpus(a.seed, a.per_category, a.out, a.duration, cfg.flow.idle_timeout_s);
    std::cout << rows.size() << " captures written to " << a.out << '\n';
}

struct SynthPcapArgs {
    std::string category, mode, out;
    double duration = kDefaultCaptureDurationS;
    std::uint64_t seed = 0;
};

void run_synth_pcap(const Global& g, const SynthPcapArgs& a) {
    const Config cfg = g.config();
    const auto category = parse_category(a.category);
    if (!category) throw UsageError("--category: unknown category '" + a.category + "'");
    const auto mode = parse_traffic_mode(a.mode);
    if (!mode) throw UsageError("--mode: expected passive or active");
    GeneratorOptions options;
    options.idle_timeout_s = cfg.flow.idle_timeout_s;
    const auto truth = generate_pcap(builtin_profile(*category, *mode), a.duration, a.seed,
                                     a.out, options);
    write_text(a.out + ".truth.json", truth.to_json());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IoT traffic classification and signature toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    Global global;
    app.add_option("--config", global.config_path,
                   "JSON config file (default: $IOTSCOPE_CONFIG, else built-in defaults)")
        ->check(CLI::ExistingFile);

    const std::string categories = "Surveillance|Hub|EnergyManagement|Appliance|StreamingDevices|NonIoT";

    ExtractArgs ex;
    auto* extract = app.add_subcommand("extract", "Extract per-flow features from pcap files to CSV");
    extract->add_option("pcaps", ex.pcaps, "Input pcap files")->check(CLI::ExistingFile);
    extract->add_option("--label", ex.label, "Label every flow with this category (" + categories + ")");
    extract->add_option("--manifest", ex.manifest, "Label captures from a corpus manifest.csv")
        ->check(CLI::ExistingFile);
    extract->add_option("--device-map", ex.device_map, "Label flows by device IP (csv: ip,label)")
        ->check(CLI::ExistingFile);
    extract->add_option("--out", ex.out, "Output CSV")->required();

    SplitArgs sp;
    auto* split = app.add_subcommand("split", "Stratified train/test split of a labeled CSV");
    split->add_option("--in", sp.in, "Labeled feature CSV")->required()->check(CLI::ExistingFile);
    split->add_option("--train", sp.train, "Output training CSV")->required();
    split->add_option("--test", sp.test, "Output test CSV")->required();
    split->add_option("--fraction", sp.fraction, "Training fraction (default 0.7)");
    split->add_option("--seed", sp.seed, "Shuffle seed (default 0)");

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train a classifier and write a model file");
    train->add_option("--model", tr.model, "Model kind: rf, mlp or knn")->required();
    train->add_option("--train", tr.train, "Labeled training CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--out", tr.out, "Output model file")->required();
    train->add_option("--seed", tr.seed, "Training seed (rf, mlp; default 0)");
    train->add_option("--param", tr.params,
                      "Hyperparameter override name=value, repeatable "
                      "(rf: n_trees=200 max_features=63 max_depth=none min_samples_leaf=1; "
                      "mlp: hidden_neurons=100 learning_rate=0.001 batch_size=32 max_epochs=200; "
                      "knn: k=5 algorithm=auto minkowski_p=2)");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Evaluate a model on a labeled test CSV");
    eval->add_option("--model", ev.model, "Model file")->required()->check(CLI::ExistingFile);
    eval->add_option("--test", ev.test, "Labeled test CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--report", ev.report, "Write the JSON report here");

    GridArgs gr;
    auto* grid = app.add_subcommand("grid-search", "Cross-validated grid search over hyperparameters");
    grid->add_option("--model", gr.model, "Model kind: rf, mlp or knn")->required();
    grid->add_option("--train", gr.train, "Labeled training CSV")->required()->check(CLI::ExistingFile);
    grid->add_option("--folds", gr.folds, "Stratified folds (default 5)");
    grid->add_option("--seed", gr.seed, "Fold assignment seed (default 0)");
    grid->add_option("--grid", gr.grid,
                     "Grid axis name=v1,v2,... repeatable (default: rf n_trees=100,200,500; "
                     "mlp hidden_neurons=50,100; knn k=3,5,7)");
    grid->add_option("--out", gr.out, "Write the result table as JSON here");

    auto* rules = app.add_subcommand("rules", "Snort rule generation and matching");
    rules->require_subcommand(1);
    RulesGenArgs rg;
    auto* rules_gen = rules->add_subcommand("gen", "Generate Snort rules from a signature DB");
    rules_gen->add_option("--db", rg.db, "Signature DB (JSON)")->required()->check(CLI::ExistingFile);
    rules_gen->add_option("--out", rg.out, "Output rules file")->required();
    RulesMatchArgs rm;
    auto* rules_match = rules->add_subcommand("match", "Match rules against a pcap and log alerts");
    rules_match->add_option("--rules", rm.rules, "Rules file")->required()->check(CLI::ExistingFile);
    rules_match->add_option("--pcap", rm.pcap, "Capture to scan")->required()->check(CLI::ExistingFile);
    rules_match->add_option("--alerts", rm.alerts, "Output alert log")->required();
    rules_match->add_option("--db", rm.db, "Signature DB the rules came from, to attribute alerts")
        ->check(CLI::ExistingFile);

    DnsReportArgs dr;
    auto* dns = app.add_subcommand("dns-report", "Queried DNS names ranked by frequency");
    dns->add_option("--pcap", dr.pcap, "Capture to scan")->required()->check(CLI::ExistingFile);
    dns->add_option("--out", dr.out, "Write CSV here instead of stdout");

    auto* synth = app.add_subcommand("synth", "Synthetic labeled traffic");
    synth->require_subcommand(1);
    SynthCorpusArgs sc;
    auto* corpus = synth->add_subcommand("corpus", "Generate a labeled corpus with manifest.csv");
    corpus->add_option("--seed", sc.seed, "Corpus seed")->required();
    corpus->add_option("--per-category", sc.per_category, "Captures per category and mode")
        ->capture_default_str();
    corpus->add_option("--out", sc.out, "Output directory")->required();
    corpus->add_option("--duration", sc.duration, "Capture length in seconds")->capture_default_str();
    SynthPcapArgs spc;
    auto* synth_pcap = synth->add_subcommand("pcap", "Generate one capture from a builtin profile");
    synth_pcap->add_option("--category", spc.category, "Device category (" + categories + ")")->required();
    synth_pcap->add_option("--mode", spc.mode, "passive or active")->required();
    synth_pcap->add_option("--duration", spc.duration, "Capture length in seconds")->capture_default_str();
    synth_pcap->add_option("--seed", spc.seed, "Generator seed")->capture_default_str();
    synth_pcap->add_option("--out", spc.out, "Output pcap")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsageError;
    }

    try {
        if (*extract) run_extract(global, ex);
        if (*split) run_split(global, sp);
        if (*train) run_train(global, tr);
        if (*eval) run_eval(global, ev);
        if (*grid) run_grid(global, gr);
        if (*rules_gen) run_rules_gen(global, rg);
        if (*rules_match) run_rules_match(global, rm);
        if (*dns) run_dns_report(global, dr);
        if (*corpus) run_synth_corpus(global, sc);
        if (*synth_pcap) run_synth_pcap(global, spc);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsageError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.name() << ": " << e.what() << '\n';
        return kExitDomainError;
    }
    return 0;
}

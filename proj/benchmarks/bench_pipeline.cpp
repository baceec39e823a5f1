#include <benchmark/benchmark.h>

#include <filesystem>
#include <unistd.h>

#include "iotscope/features.hpp"
#include "iotscope/forest.hpp"
#include "iotscope/knn.hpp"
#include "iotscope/pcap.hpp"
#include "iotscope/rng.hpp"
#include "iotscope/snort.hpp"
#include "iotscope/synth.hpp"

using namespace iotscope;
namespace fs = std::filesystem;

namespace {

fs::path capture(Category c, TrafficMode m, double seconds) {
    const fs::path p = fs::temp_directory_path() /
                       ("iotscope_bench_" + std::to_string(::getpid()) + "_" + std::string(category_name(c)) +
                        "_" + std::string(traffic_mode_name(m)) + ".pcap");
    if (!fs::exists(p)) generate_pcap(builtin_profile(c, m), seconds, 42, p);
    return p;
}

struct Blobs {
    Matrix x;
    std::vector<Category> y;
};

Blobs blobs(std::size_t n, std::size_t dims, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Blobs b{Matrix(n, dims), {}};
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % kNumCategories);
        for (std::size_t j = 0; j < dims; ++j) b.x(i, j) = c * 0.5 + rng.normal();
        b.y.push_back(category_from_code(c));
    }
    return b;
}

}  // namespace

static void BM_ExtractCapture(benchmark::State& state) {
    const auto path = capture(Category::StreamingDevices, TrafficMode::Active, 60.0);
    const std::size_t packets = read_pcap(path).packets.size();
    for (auto _ : state) benchmark::DoNotOptimize(extract_flows(path));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * packets));
    fs::remove(path);
}
BENCHMARK(BM_ExtractCapture)->Unit(benchmark::kMillisecond);

static void BM_TrainForest(benchmark::State& state) {
    const auto data = blobs(static_cast<std::size_t>(state.range(0)), kNumFeatures, 3);
    ForestParams p;
    p.n_trees = 50;
    for (auto _ : state) benchmark::DoNotOptimize(train_forest(data.x, data.y, p));
}
BENCHMARK(BM_TrainForest)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_PredictKnn(benchmark::State& state) {
    const auto dims = static_cast<std::size_t>(state.range(0));
    const auto data = blobs(5000, dims, 5);
    const auto model = train_knn(data.x, data.y, KnnParams{});
    SplitMix64 rng(9);
    std::vector<double> q(dims);
    for (auto _ : state) {
        for (auto& v : q) v = rng.normal();
        benchmark::DoNotOptimize(predict_knn(model, q));
    }
}
BENCHMARK(BM_PredictKnn)->Arg(5)->Arg(static_cast<std::int64_t>(kNumFeatures));

static void BM_MatchRules(benchmark::State& state) {
    const auto path = capture(Category::Hub, TrafficMode::Active, 60.0);
    const auto packets = read_pcap(path).packets;
    fs::remove(path);
    std::vector<SignatureEntry> db;
    for (int i = 0; i < 20; ++i) {
        SignatureEntry e;
        e.id = "device-" + std::to_string(i);
        e.action = "action " + std::to_string(i);
        e.ip_addresses = {Ipv4{0xC6336400u + static_cast<std::uint32_t>(i)}};
        e.domain_patterns = {"(^|\\.)vendor" + std::to_string(i) + "\\.example$"};
        db.push_back(e);
    }
    const auto rules = generate_rules(db).rules;
    for (auto _ : state) benchmark::DoNotOptimize(match_rules(packets, rules));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * packets.size()));
}
BENCHMARK(BM_MatchRules)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();

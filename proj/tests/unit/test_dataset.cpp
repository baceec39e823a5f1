#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "iotscope/dataset.hpp"
#include "iotscope/knn.hpp"
#include "support.hpp"

using namespace iotscope;
using namespace iotscope::testing;

namespace {

Dataset dataset_with_counts(std::array<std::size_t, kNumCategories> counts, std::uint64_t seed = 1) {
    SplitMix64 rng(seed);
    Dataset ds;
    for (int c = 0; c < kNumCategories; ++c) {
        for (std::size_t i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
            LabeledSample s;
            for (auto& x : s.features.values) x = rng.normal();
            s.label = category_from_code(c);
            s.origin = "c" + std::to_string(c) + "#" + std::to_string(i);
            ds.samples.push_back(s);
        }
    }
    // Interleave so class members are not contiguous.
    rng.shuffle(std::span<LabeledSample>(ds.samples));
    return ds;
}

}  // namespace

TEST(LabelFlows, EmptyInputGivesEmptyDataset) {
    EXPECT_TRUE(label_flows({}, Category::Hub, "x").empty());
}

TEST(LabelFlows, EverySampleCarriesLabelAndOrigin) {
    const std::vector<FeatureVector> v(3);
    const auto ds = label_flows(v, Category::Hub, "cap.pcap");
    ASSERT_EQ(ds.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(ds.samples[i].label, Category::Hub);
        EXPECT_EQ(ds.samples[i].origin, "cap.pcap#" + std::to_string(i));
    }
}

TEST(LabelFlows, MergedCapturesCountPerClass) {
    Dataset ds = label_flows(std::vector<FeatureVector>(3), Category::Hub, "a");
    ds.append(label_flows(std::vector<FeatureVector>(2), Category::Appliance, "b"));
    const auto counts = ds.class_counts();
    EXPECT_EQ(counts[static_cast<std::size_t>(code(Category::Hub))], 3u);
    EXPECT_EQ(counts[static_cast<std::size_t>(code(Category::Appliance))], 2u);
    EXPECT_EQ(counts[0] + counts[2] + counts[4] + counts[5], 0u);
}

TEST(StratifiedSplit, SeventyThirtyOnTenPerClass) {
    const auto ds = dataset_with_counts({10, 10, 10, 10, 10, 10});
    const auto s = stratified_split(ds, 0.7, 42);
    for (std::size_t c = 0; c < kNumCategories; ++c) {
        EXPECT_EQ(s.train.class_counts()[c], 7u);
        EXPECT_EQ(s.test.class_counts()[c], 3u);
    }
}

TEST(StratifiedSplit, HalfOfTwoIsOneEach) {
    const auto s = stratified_split(dataset_with_counts({2, 2, 2, 2, 2, 2}), 0.5, 3);
    for (std::size_t c = 0; c < kNumCategories; ++c) {
        EXPECT_EQ(s.train.class_counts()[c], 1u);
        EXPECT_EQ(s.test.class_counts()[c], 1u);
    }
}

TEST(StratifiedSplit, DeterministicPerSeed) {
    const auto ds = dataset_with_counts({13, 7, 22, 5, 9, 31});
    const auto a = stratified_split(ds, 0.7, 5);
    const auto b = stratified_split(ds, 0.7, 5);
    EXPECT_EQ(a.train_indices, b.train_indices);
    EXPECT_EQ(a.test_indices, b.test_indices);
    EXPECT_NE(a.train_indices, stratified_split(ds, 0.7, 6).train_indices);
}

TEST(StratifiedSplit, SingletonClassIsTooSmall) {
    EXPECT_THROW(stratified_split(dataset_with_counts({5, 1, 5, 5, 5, 5}), 0.7, 0), ClassTooSmall);
}

TEST(StratifiedSplit, AbsentClassesAreAllowed) {
    EXPECT_NO_THROW(stratified_split(dataset_with_counts({5, 0, 5, 0, 0, 0}), 0.7, 0));
}

TEST(StratifiedSplit, RejectsFractionOutsideUnitInterval) {
    const auto ds = dataset_with_counts({4, 4, 4, 4, 4, 4});
    EXPECT_THROW(stratified_split(ds, 0.0, 0), InvalidArgument);
    EXPECT_THROW(stratified_split(ds, 1.0, 0), InvalidArgument);
}

TEST(StratifiedSplit, PartitionAndRoundHalfUpProperty) {
    SplitMix64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<std::size_t, kNumCategories> counts{};
        for (auto& c : counts) c = rng.below(3) == 0 ? 0 : 2 + rng.below(40);
        const double fraction = 0.05 + 0.9 * rng.uniform();
        const auto ds = dataset_with_counts(counts, rng.next());
        const auto s = stratified_split(ds, fraction, rng.next());

        std::set<std::string> train, test;
        for (const auto& x : s.train.samples) train.insert(x.origin);
        for (const auto& x : s.test.samples) test.insert(x.origin);
        EXPECT_EQ(train.size() + test.size(), ds.size());
        for (const auto& o : train) EXPECT_EQ(test.count(o), 0u);

        for (std::size_t c = 0; c < kNumCategories; ++c) {
            if (counts[c] == 0) continue;
            const double n = static_cast<double>(counts[c]);
            auto want = static_cast<std::size_t>(std::floor(fraction * n + 0.5));
            want = std::clamp<std::size_t>(want, 1, counts[c] - 1);
            EXPECT_EQ(s.train.class_counts()[c], want);
        }
        EXPECT_TRUE(std::is_sorted(s.train_indices.begin(), s.train_indices.end()));
    }
}

TEST(StratifiedSplit, SeventyPercentCountsMatchExactArithmetic) {
    // 0.7 * 45 is 31.499... in binary floating point; the count must still be 32.
    EXPECT_EQ(stratified_train_count(45, 0.7), 32u);
    for (std::size_t n = 2; n <= 5000; ++n) {
        const std::size_t want = std::min((7 * n + 5) / 10, n - 1);
        ASSERT_EQ(stratified_train_count(n, 0.7), want) << n;
    }
}

TEST(Scaler, TwoValueColumn) {
    Matrix m(2, 1);
    m(0, 0) = 1;
    m(1, 0) = 3;
    const auto s = fit_scaler(m);
    EXPECT_DOUBLE_EQ(s.means[0], 2.0);
    EXPECT_DOUBLE_EQ(s.stds[0], 1.0);
    const std::vector<double> three{3.0};
    EXPECT_DOUBLE_EQ(s.apply(three)[0], 1.0);
}

TEST(Scaler, ConstantColumnCentersToZero) {
    Matrix m(3, 1);
    m.data = {5, 5, 5};
    const auto s = fit_scaler(m);
    EXPECT_EQ(s.stds[0], 1.0);
    const auto t = s.apply(m);
    for (double x : t.data) EXPECT_EQ(x, 0.0);
}

TEST(Scaler, StandardizesTrainingColumns) {
    const auto b = make_blobs(30, 4, 3.0, 2.0, 17);
    const auto s = fit_scaler(b.x);
    const auto t = s.apply(b.x);
    for (std::size_t j = 0; j < t.cols; ++j) {
        double sum = 0, sq = 0;
        for (std::size_t i = 0; i < t.rows; ++i) sum += t(i, j);
        const double mean = sum / static_cast<double>(t.rows);
        for (std::size_t i = 0; i < t.rows; ++i) sq += (t(i, j) - mean) * (t(i, j) - mean);
        EXPECT_NEAR(mean, 0.0, 1e-12);
        EXPECT_NEAR(std::sqrt(sq / static_cast<double>(t.rows)), 1.0, 1e-12);
    }
}

TEST(Scaler, InvertRecoversInputs) {
    const auto b = make_blobs(20, 5, 10.0, 3.0, 4);
    const auto s = fit_scaler(b.x);
    for (std::size_t i = 0; i < b.x.rows; ++i) {
        const auto back = s.invert(s.apply(b.x.row(i)));
        for (std::size_t j = 0; j < b.x.cols; ++j) {
            EXPECT_TRUE(close_rel(back[j], b.x(i, j), 1e-9));
        }
    }
}

TEST(Scaler, EmptyTrainingSetIsError) {
    EXPECT_THROW(fit_scaler(Matrix(0, 3)), EmptyDataset);
    EXPECT_THROW(fit_scaler(Dataset{}), EmptyDataset);
}

TEST(Scaler, NeighborOrderIgnoresColumnUnits) {
    const auto b = make_blobs(20, 3, 1.0, 1.0, 12);
    Matrix scaled = b.x;
    const double factors[] = {1000.0, 0.001, 7.5};
    for (std::size_t i = 0; i < scaled.rows; ++i) {
        for (std::size_t j = 0; j < 3; ++j) scaled(i, j) *= factors[j];
    }
    KnnParams p;
    p.k = 7;
    const auto m1 = train_knn(b.x, b.y, p);
    const auto m2 = train_knn(scaled, b.y, p);
    SplitMix64 rng(1);
    for (int q = 0; q < 30; ++q) {
        std::vector<double> x(3), y(3);
        for (std::size_t j = 0; j < 3; ++j) {
            x[j] = 5 * rng.uniform();
            y[j] = x[j] * factors[j];
        }
        EXPECT_EQ(predict_knn(m1, x).neighbor_indices, predict_knn(m2, y).neighbor_indices);
    }
}

TEST(DatasetCsv, RoundTripsLabelsAndValues) {
    TempDir dir("dataset-csv");
    Dataset ds = dataset_with_counts({2, 1, 0, 3, 0, 1});
    for (auto& s : ds.samples) {
        for (auto& x : s.features.values) x = std::round(x * 1000) / 1000;
    }
    save_dataset_csv(ds, dir / "d.csv");
    const auto back = load_dataset_csv(dir / "d.csv");
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
        EXPECT_EQ(back.samples[i].features, ds.samples[i].features);
        EXPECT_EQ(back.samples[i].origin, "d.csv#" + std::to_string(i));
    }
}

TEST(DatasetCsv, RejectsBadHeaderAndRows) {
    TempDir dir("dataset-bad");
    write_file(dir / "h.csv", "a,b,label\n");
    EXPECT_THROW(load_dataset_csv(dir / "h.csv"), ParseError);

    save_dataset_csv(dataset_with_counts({2, 0, 0, 0, 0, 0}), dir / "ok.csv");
    auto text = read_file(dir / "ok.csv");
    write_file(dir / "label.csv", text.substr(0, text.rfind("Surveillance")) + "Toaster\n");
    EXPECT_THROW(load_dataset_csv(dir / "label.csv"), ParseError);
    write_file(dir / "short.csv", text + "1,2,Hub\n");
    EXPECT_THROW(load_dataset_csv(dir / "short.csv"), ParseError);
    EXPECT_THROW(load_dataset_csv(dir / "missing.csv"), IoError);
}

TEST(DeviceMap, LabelsFlowsByDeviceAddress) {
    TempDir dir("devmap");
    write_file(dir / "map.csv", "ip,label\n# cameras\n10.0.0.7,Surveillance\n10.0.0.9,Hub\n");
    const auto map = load_device_map(dir / "map.csv");
    ASSERT_EQ(map.size(), 2u);

    Extraction ex;
    auto add = [&](const char* a, const char* b) {
        ExtractedFlow f;
        f.flow.initiator = {ip(a), 1};
        f.flow.key.lo = f.flow.initiator;
        f.flow.key.hi = {ip(b), 2};
        ex.flows.push_back(f);
    };
    add("10.0.0.7", "203.0.113.1");  // device initiates
    add("203.0.113.2", "10.0.0.9");  // device responds
    add("10.0.0.1", "203.0.113.3");  // unknown device: dropped
    const auto ds = label_by_device_map(ex, map, "mixed.pcap");
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.samples[0].label, Category::Surveillance);
    EXPECT_EQ(ds.samples[1].label, Category::Hub);
    EXPECT_EQ(ds.samples[1].origin, "mixed.pcap#1");

    write_file(dir / "bad.csv", "10.0.0.1,Fridge\n");
    EXPECT_THROW(load_device_map(dir / "bad.csv"), ParseError);
}

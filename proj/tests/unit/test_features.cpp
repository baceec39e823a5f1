#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "feature_oracle.hpp"
#include "iotscope/features.hpp"
#include "support.hpp"

using namespace iotscope;
using namespace iotscope::testing;

namespace {

FlowScript script(std::initializer_list<OracleEvent> ev) { return {"t", ev}; }

FeatureVector features_of(const FlowScript& s, const FlowConfig& cfg = {}) {
    return compute_features(to_flow_record(s), cfg);
}

}  // namespace

TEST(FeatureSchema, SixtyThreeUniqueNames) {
    const auto& names = feature_names();
    EXPECT_EQ(names.size(), 63u);
    EXPECT_EQ(std::set<std::string_view>(names.begin(), names.end()).size(), 63u);
    EXPECT_EQ(names.front(), "flow_duration");
    EXPECT_EQ(names[61], "down_up_ratio");
    EXPECT_EQ(names[62], "urg_count");
    for (std::size_t i = 0; i < names.size(); ++i) {
        EXPECT_EQ(feature_by_name(names[i]), static_cast<Feature>(i));
    }
    EXPECT_FALSE(feature_by_name("nope"));
}

TEST(ComputeFeatures, TwoForwardPackets) {
    const auto v = features_of(script({{0, true, 100, 40, 0, 0}, {2'000'000, true, 100, 40, 0, 0}}));
    EXPECT_DOUBLE_EQ(v[Feature::flow_duration], 2.0);
    EXPECT_DOUBLE_EQ(v[Feature::flow_bytes_per_s], 100.0);
    EXPECT_DOUBLE_EQ(v[Feature::flow_packets_per_s], 1.0);
    EXPECT_DOUBLE_EQ(v[Feature::flow_iat_mean], 2.0);
    EXPECT_DOUBLE_EQ(v[Feature::flow_iat_std], 0.0);
    EXPECT_DOUBLE_EQ(v[Feature::fwd_packet_count], 2.0);
    EXPECT_DOUBLE_EQ(v[Feature::bwd_packet_count], 0.0);
    EXPECT_DOUBLE_EQ(v[Feature::down_up_ratio], 0.0);
}

TEST(ComputeFeatures, SinglePacketIsDegenerate) {
    const auto v = features_of(script({{5, true, 77, 40, tcp_flag::SYN, 1000}}));
    EXPECT_EQ(v[Feature::flow_duration], 0.0);
    for (auto f : {Feature::flow_bytes_per_s, Feature::flow_packets_per_s, Feature::fwd_packets_per_s,
                   Feature::bwd_packets_per_s, Feature::flow_iat_mean, Feature::flow_iat_std,
                   Feature::flow_iat_max, Feature::flow_iat_min, Feature::fwd_iat_mean,
                   Feature::pkt_len_std}) {
        EXPECT_EQ(v[f], 0.0) << feature_names()[static_cast<std::size_t>(f)];
    }
    EXPECT_EQ(v[Feature::pkt_len_min], 77.0);
    EXPECT_EQ(v[Feature::pkt_len_max], 77.0);
    EXPECT_EQ(v[Feature::pkt_len_mean], 77.0);
    EXPECT_EQ(v[Feature::init_fwd_win_bytes], 1000.0);
    EXPECT_EQ(v[Feature::init_bwd_win_bytes], 0.0);
}

TEST(ComputeFeatures, ActiveAndIdlePeriods) {
    FlowConfig cfg;
    cfg.activity_timeout_s = 5;
    const auto v = features_of(script({{0, true, 60, 40, 0, 0},
                                       {1'000'000, true, 60, 40, 0, 0},
                                       {2'000'000, true, 60, 40, 0, 0},
                                       {10'000'000, true, 60, 40, 0, 0},
                                       {11'000'000, true, 60, 40, 0, 0}}),
                               cfg);
    EXPECT_DOUBLE_EQ(v[Feature::active_mean], 1.5);
    EXPECT_DOUBLE_EQ(v[Feature::active_max], 2.0);
    EXPECT_DOUBLE_EQ(v[Feature::active_min], 1.0);
    EXPECT_DOUBLE_EQ(v[Feature::idle_mean], 8.0);
    EXPECT_DOUBLE_EQ(v[Feature::idle_max], 8.0);
    EXPECT_DOUBLE_EQ(v[Feature::idle_min], 8.0);
    EXPECT_DOUBLE_EQ(v[Feature::idle_std], 0.0);
}

TEST(ComputeFeatures, BulkRequiresMinimumRun) {
    FlowConfig cfg;
    cfg.bulk_min_packets = 4;
    auto three = script({{0, true, 100, 40, 0, 0}, {1, true, 100, 40, 0, 0}, {2, true, 100, 40, 0, 0}});
    EXPECT_EQ(features_of(three, cfg)[Feature::fwd_bytes_bulk_avg], 0.0);
    three.events.push_back({500'000, true, 200, 40, 0, 0});
    const auto v = features_of(three, cfg);
    EXPECT_DOUBLE_EQ(v[Feature::fwd_bytes_bulk_avg], 500.0);
    EXPECT_DOUBLE_EQ(v[Feature::fwd_packets_bulk_avg], 4.0);
    EXPECT_DOUBLE_EQ(v[Feature::fwd_bulk_rate_avg], 1000.0);
    EXPECT_EQ(v[Feature::bwd_bytes_bulk_avg], 0.0);
}

TEST(ComputeFeatures, SubflowsDivideDirectionTotals) {
    const auto v = features_of(script({{0, true, 100, 40, 0, 0},
                                       {3'000'000, false, 200, 40, 0, 0},
                                       {3'500'000, true, 300, 40, 0, 0}}));
    // One gap over 1 s: two subflows.
    EXPECT_DOUBLE_EQ(v[Feature::subflow_fwd_packets], 1.0);
    EXPECT_DOUBLE_EQ(v[Feature::subflow_fwd_bytes], 200.0);
    EXPECT_DOUBLE_EQ(v[Feature::subflow_bwd_packets], 0.5);
    EXPECT_DOUBLE_EQ(v[Feature::subflow_bwd_bytes], 100.0);
}

TEST(ComputeFeatures, MatchesStraightLineOracleOnHandFlows) {
    const FlowConfig cfg;
    for (const auto& flow : hand_flows()) {
        const auto v = features_of(flow, cfg);
        const auto expected = oracle_features(flow, cfg);
        ASSERT_EQ(expected.size(), kNumFeatures) << flow.name;
        for (const auto& [name, want] : expected) {
            const auto f = feature_by_name(name);
            ASSERT_TRUE(f) << name;
            EXPECT_TRUE(close_rel(v[*f], want, 1e-9))
                << flow.name << ": " << name << " = " << v[*f] << ", oracle " << want;
        }
    }
}

TEST(ComputeFeatures, RandomFlowsSatisfyInvariantsAndOracle) {
    SplitMix64 rng(99);
    FlowConfig cfg;
    cfg.activity_timeout_s = 0.5;
    cfg.subflow_gap_s = 0.2;
    cfg.bulk_gap_s = 0.3;
    cfg.bulk_min_packets = 2;
    for (int trial = 0; trial < 300; ++trial) {
        FlowScript s{"random", {}};
        std::int64_t t = 0;
        const auto n = 1 + rng.below(10);
        for (std::size_t i = 0; i < n; ++i) {
            t += static_cast<std::int64_t>(rng.below(3) == 0 ? 0 : rng.below(1'000'000));
            s.events.push_back({t, i == 0 || rng.below(2) == 0, 40 + static_cast<std::uint32_t>(rng.below(1460)),
                                40, static_cast<std::uint8_t>(rng.below(256)),
                                static_cast<std::uint16_t>(rng.below(65536))});
        }
        const auto v = features_of(s, cfg);
        for (double x : v.values) ASSERT_TRUE(std::isfinite(x));
        EXPECT_LE(v[Feature::pkt_len_min], v[Feature::pkt_len_mean] + 1e-9);
        EXPECT_LE(v[Feature::pkt_len_mean], v[Feature::pkt_len_max] + 1e-9);
        EXPECT_TRUE(close_rel(v[Feature::pkt_len_variance],
                              v[Feature::pkt_len_std] * v[Feature::pkt_len_std], 1e-9));
        EXPECT_DOUBLE_EQ(v[Feature::fwd_packet_count] + v[Feature::bwd_packet_count],
                         static_cast<double>(n));
        double bytes = 0;
        for (const auto& e : s.events) bytes += e.len;
        EXPECT_DOUBLE_EQ(v[Feature::fwd_bytes_total] + v[Feature::bwd_bytes_total], bytes);
        EXPECT_LE(v[Feature::subflow_fwd_packets], v[Feature::fwd_packet_count]);
        const auto expected = oracle_features(s, cfg);
        for (const auto& [name, want] : expected) {
            ASSERT_TRUE(close_rel(v[*feature_by_name(name)], want, 1e-9)) << name;
        }
    }
}

TEST(ComputeFeatures, OrderWithinDirectionAtEqualTimesDoesNotMatter) {
    auto a = script({{0, true, 60, 40, 0, 0}, {10, true, 100, 40, 0, 0}, {10, true, 300, 40, 0, 0},
                     {20, false, 70, 40, 0, 0}});
    auto b = a;
    std::swap(b.events[1], b.events[2]);
    EXPECT_EQ(features_of(a), features_of(b));
}

TEST(FlowConfig, ValidateRejectsNonPositive) {
    FlowConfig c;
    EXPECT_NO_THROW(c.validate());
    c.activity_timeout_s = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.bulk_min_packets = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(FeatureCsv, HeaderAndRowFormat) {
    std::ostringstream out;
    write_feature_csv_header(out, true);
    FeatureVector v;
    v[Feature::flow_duration] = 0.1;
    v[Feature::flow_bytes_per_s] = -0.0;
    v[Feature::fwd_packet_count] = 3;
    v[Feature::pkt_len_mean] = 1.0 / 3.0;
    write_feature_csv_row(out, v, "Hub");
    const auto text = out.str();
    const auto nl = text.find('\n');
    const auto header = text.substr(0, nl);
    EXPECT_EQ(header.rfind("flow_duration,flow_bytes_per_s,", 0), 0u);
    EXPECT_NE(header.find(",urg_count,label"), std::string::npos);
    const auto row = text.substr(nl + 1);
    EXPECT_EQ(row.rfind("0.1,0,0,", 0), 0u);
    EXPECT_NE(row.find(",0.333333333,"), std::string::npos);
    EXPECT_EQ(row.substr(row.size() - 5), ",Hub\n");
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 63);
}

TEST(Extract, HandshakePcap) {
    TempDir dir("extract");
    const auto path = dir / "hs.pcap";
    {
        PcapWriter w(path);
        FrameSpec s;
        s.src = {*parse_ipv4("10.0.0.1"), 51000};
        s.dst = {*parse_ipv4("10.0.0.2"), 80};
        s.tcp_flags = tcp_flag::SYN;
        w.write(0, build_frame(s));
        FrameSpec r = s;
        std::swap(r.src, r.dst);
        r.tcp_flags = tcp_flag::SYN | tcp_flag::ACK;
        w.write(1000, build_frame(r));
        s.tcp_flags = tcp_flag::ACK;
        w.write(2000, build_frame(s));
    }
    const auto v = extract(path);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0][Feature::syn_count], 2.0);
    EXPECT_EQ(v[0][Feature::ack_count], 2.0);
    EXPECT_EQ(v[0][Feature::fin_count], 0.0);
}

TEST(Extract, EmptyPcap) {
    TempDir dir("extract-empty");
    const auto path = dir / "empty.pcap";
    { PcapWriter w(path); }
    EXPECT_TRUE(extract(path).empty());
}

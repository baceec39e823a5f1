#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "iotscope/flow.hpp"

namespace iotscope {

// Column indices of the canonical 63-feature schema, in CSV order.
enum class Feature : std::uint8_t {
    flow_duration,
    flow_bytes_per_s,
    flow_packets_per_s,
    flow_iat_mean,
    flow_iat_std,
    flow_iat_max,
    flow_iat_min,
    fwd_packet_count,
    bwd_packet_count,
    fwd_bytes_total,
    bwd_bytes_total,
    fwd_packets_per_s,
    bwd_packets_per_s,
    fwd_pkt_len_max,
    fwd_pkt_len_min,
    fwd_pkt_len_mean,
    fwd_pkt_len_std,
    bwd_pkt_len_max,
    bwd_pkt_len_min,
    bwd_pkt_len_mean,
    bwd_pkt_len_std,
    pkt_len_min,
    pkt_len_max,
    pkt_len_mean,
    pkt_len_std,
    pkt_len_variance,
    fwd_header_len,
    bwd_header_len,
    fwd_iat_mean,
    fwd_iat_std,
    fwd_iat_max,
    fwd_iat_min,
    bwd_iat_mean,
    bwd_iat_std,
    bwd_iat_max,
    bwd_iat_min,
    syn_count,
    ack_count,
    fin_count,
    rst_count,
    psh_count,
    fwd_bytes_bulk_avg,
    fwd_packets_bulk_avg,
    fwd_bulk_rate_avg,
    bwd_bytes_bulk_avg,
    bwd_packets_bulk_avg,
    bwd_bulk_rate_avg,
    subflow_fwd_packets,
    subflow_fwd_bytes,
    subflow_bwd_packets,
    subflow_bwd_bytes,
    init_fwd_win_bytes,
    init_bwd_win_bytes,
    active_mean,
    active_std,
    active_max,
    active_min,
    idle_mean,
    idle_std,
    idle_max,
    idle_min,
    down_up_ratio,
    urg_count,
};

inline constexpr std::size_t kNumFeatures = 63;
static_assert(static_cast<std::size_t>(Feature::urg_count) + 1 == kNumFeatures);

const std::array<std::string_view, kNumFeatures>& feature_names() noexcept;
std::optional<Feature> feature_by_name(std::string_view name) noexcept;

struct FeatureVector {
    std::array<double, kNumFeatures> values{};

    double& operator[](Feature f) noexcept { return values[static_cast<std::size_t>(f)]; }
    double operator[](Feature f) const noexcept { return values[static_cast<std::size_t>(f)]; }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Timeouts and thresholds for flow assembly and feature computation.
struct FlowConfig {
    double idle_timeout_s = kDefaultIdleTimeoutS;
    double activity_timeout_s = 5.0;
    double subflow_gap_s = 1.0;
    double bulk_gap_s = 1.0;
    int bulk_min_packets = 4;

    void validate() const;
};

// Computes the 63 features of one flow. Standard deviations are population
// standard deviations; every statistic over an empty set and every rate or
// ratio with a zero denominator is 0.
//
// Packets of both directions are merged by timestamp (forward first on equal
// timestamps) for flow-level IATs, active/idle periods, subflows, and bulks.
FeatureVector compute_features(const FlowRecord& flow, const FlowConfig& config = {});

struct ExtractedFlow {
    FlowRecord flow;
    FeatureVector features;
};

struct Extraction {
    std::vector<ExtractedFlow> flows;
    std::size_t skipped_frames = 0;
};

Extraction extract_flows(const std::filesystem::path& pcap, const FlowConfig& config = {});
std::vector<FeatureVector> extract(const std::filesystem::path& pcap, const FlowConfig& config = {});

// Reals are rendered with up to 9 significant digits.
std::string format_real(double value);

void write_feature_csv_header(std::ostream& out, bool with_label);
void write_feature_csv_row(std::ostream& out, const FeatureVector& v,
                           std::optional<std::string_view> label = std::nullopt);

}  // namespace iotscope

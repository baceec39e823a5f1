#include "iotscope/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace iotscope {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames{
    "flow_duration",        "flow_bytes_per_s",     "flow_packets_per_s",
    "flow_iat_mean",        "flow_iat_std",         "flow_iat_max",
    "flow_iat_min",         "fwd_packet_count",     "bwd_packet_count",
    "fwd_bytes_total",      "bwd_bytes_total",      "fwd_packets_per_s",
    "bwd_packets_per_s",    "fwd_pkt_len_max",      "fwd_pkt_len_min",
    "fwd_pkt_len_mean",     "fwd_pkt_len_std",      "bwd_pkt_len_max",
    "bwd_pkt_len_min",      "bwd_pkt_len_mean",     "bwd_pkt_len_std",
    "pkt_len_min",          "pkt_len_max",          "pkt_len_mean",
    "pkt_len_std",          "pkt_len_variance",     "fwd_header_len",
    "bwd_header_len",       "fwd_iat_mean",         "fwd_iat_std",
    "fwd_iat_max",          "fwd_iat_min",          "bwd_iat_mean",
    "bwd_iat_std",          "bwd_iat_max",          "bwd_iat_min",
    "syn_count",            "ack_count",            "fin_count",
    "rst_count",            "psh_count",            "fwd_bytes_bulk_avg",
    "fwd_packets_bulk_avg", "fwd_bulk_rate_avg",    "bwd_bytes_bulk_avg",
    "bwd_packets_bulk_avg", "bwd_bulk_rate_avg",    "subflow_fwd_packets",
    "subflow_fwd_bytes",    "subflow_bwd_packets",  "subflow_bwd_bytes",
    "init_fwd_win_bytes",   "init_bwd_win_bytes",   "active_mean",
    "active_std",           "active_max",           "active_min",
    "idle_mean",            "idle_std",             "idle_max",
    "idle_min",             "down_up_ratio",        "urg_count",
};

struct Stats {
    double mean = 0, std = 0, max = 0, min = 0;
};

Stats stats_of(std::span<const double> xs) {
    Stats s;
    if (xs.empty()) return s;
    double sum = 0;
    s.max = xs[0];
    s.min = xs[0];
    for (double x : xs) {
        sum += x;
        s.max = std::max(s.max, x);
        s.min = std::min(s.min, x);
    }
    const auto n = static_cast<double>(xs.size());
    s.mean = sum / n;
    double sq = 0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / n);
    return s;
}

double seconds(std::int64_t us) { return static_cast<double>(us) / 1e6; }
double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

std::vector<double> gaps_of(const std::vector<std::int64_t>& ts) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < ts.size(); ++i) gaps.push_back(seconds(ts[i] - ts[i - 1]));
    return gaps;
}

struct Tagged {
    const FlowPacket* pkt;
    bool forward;
};

std::vector<Tagged> merge_directions(const FlowRecord& flow) {
    std::vector<Tagged> merged;
    merged.reserve(flow.packet_count());
    for (const auto& p : flow.fwd_packets) merged.push_back({&p, true});
    for (const auto& p : flow.bwd_packets) merged.push_back({&p, false});
    std::stable_sort(merged.begin(), merged.end(), [](const Tagged& a, const Tagged& b) {
        return a.pkt->timestamp_us < b.pkt->timestamp_us;
    });
    return merged;
}

struct BulkAverages {
    double bytes = 0, packets = 0, rate = 0;
};

// Maximal runs of same-direction packets with every consecutive gap <= gap_s;
// a run of at least min_packets packets is a bulk.
std::array<BulkAverages, 2> bulk_averages(const std::vector<Tagged>& merged, double gap_s,
                                          int min_packets) {
    struct Acc {
        double bytes = 0, packets = 0, rate = 0;
        int count = 0;
    };
    std::array<Acc, 2> acc{};

    std::size_t start = 0;
    auto close_run = [&](std::size_t end) {  // run is [start, end)
        const auto len = end - start;
        if (len == 0 || static_cast<int>(len) < min_packets) return;
        double bytes = 0;
        for (std::size_t i = start; i < end; ++i) bytes += merged[i].pkt->ip_total_len;
        const double dur =
            seconds(merged[end - 1].pkt->timestamp_us - merged[start].pkt->timestamp_us);
        Acc& a = acc[merged[start].forward ? 0 : 1];
        a.bytes += bytes;
        a.packets += static_cast<double>(len);
        a.rate += ratio(bytes, dur);
        ++a.count;
    };
    for (std::size_t i = 1; i <= merged.size(); ++i) {
        const bool breaks =
            i == merged.size() || merged[i].forward != merged[i - 1].forward ||
            seconds(merged[i].pkt->timestamp_us - merged[i - 1].pkt->timestamp_us) > gap_s;
        if (breaks) {
            close_run(i);
            start = i;
        }
    }

    std::array<BulkAverages, 2> out{};
    for (std::size_t d = 0; d < 2; ++d) {
        if (acc[d].count == 0) continue;
        const double n = acc[d].count;
        out[d] = {acc[d].bytes / n, acc[d].packets / n, acc[d].rate / n};
    }
    return out;
}

}  // namespace

const std::array<std::string_view, kNumFeatures>& feature_names() noexcept { return kFeatureNames; }

std::optional<Feature> feature_by_name(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (kFeatureNames[i] == name) return static_cast<Feature>(i);
    }
    return std::nullopt;
}

void FlowConfig::validate() const {
    if (!(idle_timeout_s > 0)) throw InvalidArgument("idle_timeout_s must be > 0");
    if (!(activity_timeout_s > 0)) throw InvalidArgument("activity_timeout_s must be > 0");
    if (!(subflow_gap_s > 0)) throw InvalidArgument("subflow_gap_s must be > 0");
    if (!(bulk_gap_s > 0)) throw InvalidArgument("bulk_gap_s must be > 0");
    if (bulk_min_packets < 1) throw InvalidArgument("bulk_min_packets must be >= 1");
}

FeatureVector compute_features(const FlowRecord& flow, const FlowConfig& config) {
    using F = Feature;
    FeatureVector v;

    const auto merged = merge_directions(flow);
    std::vector<std::int64_t> all_ts, fwd_ts, bwd_ts;
    std::vector<double> all_len, fwd_len, bwd_len;
    double fwd_bytes = 0, bwd_bytes = 0, fwd_hdr = 0, bwd_hdr = 0;
    for (const auto& t : merged) {
        all_ts.push_back(t.pkt->timestamp_us);
        all_len.push_back(t.pkt->ip_total_len);
        if (t.forward) {
            fwd_ts.push_back(t.pkt->timestamp_us);
            fwd_len.push_back(t.pkt->ip_total_len);
            fwd_bytes += t.pkt->ip_total_len;
            fwd_hdr += t.pkt->header_len;
        } else {
            bwd_ts.push_back(t.pkt->timestamp_us);
            bwd_len.push_back(t.pkt->ip_total_len);
            bwd_bytes += t.pkt->ip_total_len;
            bwd_hdr += t.pkt->header_len;
        }
        const std::uint8_t fl = t.pkt->tcp_flags;
        if (fl & tcp_flag::SYN) v[F::syn_count] += 1;
        if (fl & tcp_flag::ACK) v[F::ack_count] += 1;
        if (fl & tcp_flag::FIN) v[F::fin_count] += 1;
        if (fl & tcp_flag::RST) v[F::rst_count] += 1;
        if (fl & tcp_flag::PSH) v[F::psh_count] += 1;
        if (fl & tcp_flag::URG) v[F::urg_count] += 1;
    }

    const double duration = all_ts.empty() ? 0.0 : seconds(all_ts.back() - all_ts.front());
    const double n_fwd = static_cast<double>(fwd_ts.size());
    const double n_bwd = static_cast<double>(bwd_ts.size());

    v[F::flow_duration] = duration;
    v[F::flow_bytes_per_s] = ratio(fwd_bytes + bwd_bytes, duration);
    v[F::flow_packets_per_s] = ratio(n_fwd + n_bwd, duration);

    const auto flow_gaps = gaps_of(all_ts);
    const Stats flow_iat = stats_of(flow_gaps);
    v[F::flow_iat_mean] = flow_iat.mean;
    v[F::flow_iat_std] = flow_iat.std;
    v[F::flow_iat_max] = flow_iat.max;
    v[F::flow_iat_min] = flow_iat.min;

    v[F::fwd_packet_count] = n_fwd;
    v[F::bwd_packet_count] = n_bwd;
    v[F::fwd_bytes_total] = fwd_bytes;
    v[F::bwd_bytes_total] = bwd_bytes;
    v[F::fwd_packets_per_s] = ratio(n_fwd, duration);
    v[F::bwd_packets_per_s] = ratio(n_bwd, duration);

    const Stats fl = stats_of(fwd_len);
    v[F::fwd_pkt_len_max] = fl.max;
    v[F::fwd_pkt_len_min] = fl.min;
    v[F::fwd_pkt_len_mean] = fl.mean;
    v[F::fwd_pkt_len_std] = fl.std;
    const Stats bl = stats_of(bwd_len);
    v[F::bwd_pkt_len_max] = bl.max;
    v[F::bwd_pkt_len_min] = bl.min;
    v[F::bwd_pkt_len_mean] = bl.mean;
    v[F::bwd_pkt_len_std] = bl.std;
    const Stats al = stats_of(all_len);
    v[F::pkt_len_min] = al.min;
    v[F::pkt_len_max] = al.max;
    v[F::pkt_len_mean] = al.mean;
    v[F::pkt_len_std] = al.std;
    v[F::pkt_len_variance] = al.std * al.std;

    v[F::fwd_header_len] = fwd_hdr;
    v[F::bwd_header_len] = bwd_hdr;

    const Stats fi = stats_of(gaps_of(fwd_ts));
    v[F::fwd_iat_mean] = fi.mean;
    v[F::fwd_iat_std] = fi.std;
    v[F::fwd_iat_max] = fi.max;
    v[F::fwd_iat_min] = fi.min;
    const Stats bi = stats_of(gaps_of(bwd_ts));
    v[F::bwd_iat_mean] = bi.mean;
    v[F::bwd_iat_std] = bi.std;
    v[F::bwd_iat_max] = bi.max;
    v[F::bwd_iat_min] = bi.min;

    const auto bulks = bulk_averages(merged, config.bulk_gap_s, config.bulk_min_packets);
    v[F::fwd_bytes_bulk_avg] = bulks[0].bytes;
    v[F::fwd_packets_bulk_avg] = bulks[0].packets;
    v[F::fwd_bulk_rate_avg] = bulks[0].rate;
    v[F::bwd_bytes_bulk_avg] = bulks[1].bytes;
    v[F::bwd_packets_bulk_avg] = bulks[1].packets;
    v[F::bwd_bulk_rate_avg] = bulks[1].rate;

    const double subflows =
        1.0 + static_cast<double>(std::count_if(flow_gaps.begin(), flow_gaps.end(),
                                                [&](double g) { return g > config.subflow_gap_s; }));
    v[F::subflow_fwd_packets] = n_fwd / subflows;
    v[F::subflow_fwd_bytes] = fwd_bytes / subflows;
    v[F::subflow_bwd_packets] = n_bwd / subflows;
    v[F::subflow_bwd_bytes] = bwd_bytes / subflows;

    v[F::init_fwd_win_bytes] = flow.fwd_packets.empty() ? 0.0 : flow.fwd_packets.front().tcp_window;
    v[F::init_bwd_win_bytes] = flow.bwd_packets.empty() ? 0.0 : flow.bwd_packets.front().tcp_window;

    std::vector<double> active, idle;
    if (!all_ts.empty()) {
        std::int64_t period_start = all_ts.front();
        for (std::size_t i = 1; i < all_ts.size(); ++i) {
            const double gap = seconds(all_ts[i] - all_ts[i - 1]);
            if (gap > config.activity_timeout_s) {
                active.push_back(seconds(all_ts[i - 1] - period_start));
                idle.push_back(gap);
                period_start = all_ts[i];
            }
        }
        active.push_back(seconds(all_ts.back() - period_start));
    }
    const Stats as = stats_of(active);
    v[F::active_mean] = as.mean;
    v[F::active_std] = as.std;
    v[F::active_max] = as.max;
    v[F::active_min] = as.min;
    const Stats is = stats_of(idle);
    v[F::idle_mean] = is.mean;
    v[F::idle_std] = is.std;
    v[F::idle_max] = is.max;
    v[F::idle_min] = is.min;

    v[F::down_up_ratio] = ratio(n_bwd, n_fwd);
    return v;
}

Extraction extract_flows(const std::filesystem::path& pcap, const FlowConfig& config) {
    config.validate();
    auto read = read_pcap(pcap);
    Extraction out;
    out.skipped_frames = read.skipped;
    for (auto& flow : assemble_flows(read.packets, config.idle_timeout_s)) {
        auto features = compute_features(flow, config);
        out.flows.push_back({std::move(flow), features});
    }
    return out;
}

std::vector<FeatureVector> extract(const std::filesystem::path& pcap, const FlowConfig& config) {
    std::vector<FeatureVector> out;
    for (auto& f : extract_flows(pcap, config).flows) out.push_back(f.features);
    return out;
}

std::string format_real(double value) {
    if (value == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

void write_feature_csv_header(std::ostream& out, bool with_label) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (i) out << ',';
        out << kFeatureNames[i];
    }
    if (with_label) out << ",label";
    out << '\n';
}

void write_feature_csv_row(std::ostream& out, const FeatureVector& v,
                           std::optional<std::string_view> label) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (i) out << ',';
        out << format_real(v.values[i]);
    }
    if (label) out << ',' << *label;
    out << '\n';
}

}  // namespace iotscope

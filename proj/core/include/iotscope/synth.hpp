#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iotscope/common.hpp"
#include "iotscope/flow.hpp"

namespace iotscope {

enum class TrafficMode : std::uint8_t { Passive, Active };

std::string_view traffic_mode_name(TrafficMode m) noexcept;  // "passive", "active"
std::optional<TrafficMode> parse_traffic_mode(std::string_view s) noexcept;

// Statistical description of one device category in one usage mode. The
// numbers are synthetic stand-ins, not measurements of real devices.
struct TrafficProfile {
    Category category = Category::NonIoT;
    TrafficMode mode = TrafficMode::Passive;
    double packet_rate_hz = 1.0;     // data packets per second
    double packet_size_mean = 500;   // IP total length, bytes
    double packet_size_std = 50;
    double session_length_s = 30;    // data packets are bucketed into sessions of this length
    double downlink_fraction = 0.5;  // share of data packets sent server -> device
    double burstiness = 0;           // log-normal sigma of inter-packet gaps; 0 = constant
    std::vector<std::string> dns_domains;
    Ipv4 server_ip;

    void validate() const;
};

using ProfilePair = std::pair<TrafficProfile, TrafficProfile>;  // (Passive, Active)

std::map<Category, ProfilePair> builtin_profiles();
const TrafficProfile& builtin_profile(Category c, TrafficMode m);

struct GeneratorOptions {
    double idle_timeout_s = kDefaultIdleTimeoutS;
    Ipv4 client_ip{0x0A000001};    // 10.0.0.1
    Ipv4 resolver_ip{0xCB007135};  // 203.0.113.53
    std::int64_t epoch_us = 1'700'000'000'000'000;
    // A session reuses a cached answer when its domain was resolved less than
    // this long ago.
    double dns_ttl_s = 300.0;
};

enum class SessionKind : std::uint8_t { Data, Dns };

struct SessionTruth {
    SessionKind kind = SessionKind::Data;
    std::uint16_t client_port = 0;
    std::int64_t first_ts_us = 0;
    std::size_t packets = 0;
    std::string domain;  // DNS sessions only
};

// Each session (a TCP data exchange or a DNS query/response pair) is exactly
// one flow under the idle timeout the generator was given.
struct GroundTruth {
    Category category = Category::NonIoT;
    TrafficMode mode = TrafficMode::Passive;
    std::size_t session_count = 0;
    std::size_t data_packets = 0;
    std::vector<SessionTruth> sessions;
    std::vector<std::string> queried_domains;  // in query order

    std::string to_json() const;
};

// Data packets follow the profile's rate, size and direction mix. Each TCP
// session opens with a handshake and closes with a FIN from each side; the
// handshake is preceded by a DNS lookup when the profile has domains and the
// session's domain has no fresh cached answer. Deterministic per seed.
GroundTruth generate_pcap(const TrafficProfile& profile, double duration_s, std::uint64_t seed,
                          const std::filesystem::path& out, const GeneratorOptions& options = {});

struct ManifestRow {
    std::string file;  // relative to the manifest's directory
    Category label = Category::NonIoT;
    TrafficMode mode = TrafficMode::Passive;
    std::uint64_t seed = 0;

    friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

inline constexpr double kDefaultCaptureDurationS = 60.0;

// Writes per_category_captures captures for each category and mode, a
// `<capture>.truth.json` per capture, and manifest.csv (`file,label,mode,seed`).
std::vector<ManifestRow> generate_corpus(std::uint64_t seed, int per_category_captures,
                                         const std::filesystem::path& out_dir,
                                         double capture_duration_s = kDefaultCaptureDurationS,
                                         double idle_timeout_s = kDefaultIdleTimeoutS);

std::vector<ManifestRow> load_manifest(const std::filesystem::path& path);
void save_manifest(std::span<const ManifestRow> rows, const std::filesystem::path& path);

}  // namespace iotscope

#include "iotscope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "iotscope/dns.hpp"
#include "iotscope/pcap.hpp"
#include "iotscope/rng.hpp"

namespace iotscope {

std::string_view traffic_mode_name(TrafficMode m) noexcept {
    return m == TrafficMode::Passive ? "passive" : "active";
}

std::optional<TrafficMode> parse_traffic_mode(std::string_view s) noexcept {
    if (s == "passive") return TrafficMode::Passive;
    if (s == "active") return TrafficMode::Active;
    return std::nullopt;
}

void TrafficProfile::validate() const {
    if (!(packet_rate_hz > 0)) throw InvalidArgument("packet_rate_hz must be > 0");
    if (!(packet_size_mean > 0) || !(packet_size_std >= 0)) {
        throw InvalidArgument("packet sizes must be positive");
    }
    if (!(session_length_s > 0)) throw InvalidArgument("session_length_s must be > 0");
    if (!(downlink_fraction >= 0 && downlink_fraction <= 1)) {
        throw InvalidArgument("downlink_fraction must lie in [0, 1]");
    }
    if (!(burstiness >= 0)) throw InvalidArgument("burstiness must be >= 0");
}

namespace {

Ipv4 server_for(Category c, TrafficMode m) {
    // 203.0.113.10 .. 203.0.113.21
    return Ipv4{0xCB007100u + 10u + 2u * static_cast<std::uint32_t>(code(c)) +
                (m == TrafficMode::Active ? 1u : 0u)};
}

TrafficProfile make(Category c, TrafficMode m, double rate, double size_mean, double size_std,
                    double session_s, double downlink, double burst,
                    std::vector<std::string> domains) {
    return {c, m, rate, size_mean, size_std, session_s, downlink, burst, std::move(domains),
            server_for(c, m)};
}

constexpr std::uint16_t kServerPort = 443;
constexpr std::uint16_t kFirstDataPort = 20000;
constexpr std::uint16_t kFirstDnsPort = 50000;
constexpr std::uint16_t kClientWindow = 64240;
constexpr std::uint16_t kServerWindow = 65535;
constexpr double kMinPacketSize = 60;
constexpr double kMaxPacketSize = 1500;
constexpr std::uint32_t kTcpIpHeaders = 40;

struct Emitted {
    std::int64_t ts_us;
    std::vector<std::uint8_t> frame;
};

std::int64_t micros(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1e6)); }

}  // namespace

std::map<Category, ProfilePair> builtin_profiles() {
    using C = Category;
    using M = TrafficMode;
    std::map<Category, ProfilePair> out;
    out[C::Surveillance] = {
        make(C::Surveillance, M::Passive, 1.0, 180, 20, 30, 0.3, 0.1, {"events.cam.example.net"}),
        make(C::Surveillance, M::Active, 25.0, 1100, 150, 10, 0.05, 0.2, {"stream.cam.example.net"})};
    out[C::Hub] = {
        make(C::Hub, M::Passive, 0.3, 600, 60, 40, 0.7, 0.3, {"heartbeat.hub.example.com"}),
        make(C::Hub, M::Active, 5.0, 850, 80, 15, 0.85, 0.6,
             {"news.example.com", "music.example.com"})};
    out[C::EnergyManagement] = {
        make(C::EnergyManagement, M::Passive, 0.05, 90, 5, 100, 0.5, 0.0, {"plug.energy.example.org"}),
        make(C::EnergyManagement, M::Active, 0.5, 110, 10, 60, 0.5, 0.0,
             {"control.energy.example.org"})};
    out[C::Appliance] = {
        make(C::Appliance, M::Passive, 0.1, 420, 30, 45, 0.2, 0.2, {"status.appliance.example.com"}),
        make(C::Appliance, M::Active, 1.0, 260, 20, 25, 0.15, 0.5, {"remote.appliance.example.com"})};
    out[C::StreamingDevices] = {
        make(C::StreamingDevices, M::Passive, 0.5, 520, 40, 30, 0.7, 0.3, {"guide.tv.example.net"}),
        make(C::StreamingDevices, M::Active, 60.0, 1350, 80, 10, 0.95, 0.3,
             {"live.tv.example.net", "ui.tv.example.net"})};
    out[C::NonIoT] = {
        make(C::NonIoT, M::Passive, 1.5, 400, 250, 20, 0.6, 1.5, {"updates.example.org"}),
        make(C::NonIoT, M::Active, 30.0, 1000, 450, 6, 0.8, 2.0,
             {"www.example.org", "cdn.example.org", "mail.example.org"})};
    return out;
}

const TrafficProfile& builtin_profile(Category c, TrafficMode m) {
    static const auto profiles = builtin_profiles();
    const auto& pair = profiles.at(c);
    return m == TrafficMode::Passive ? pair.first : pair.second;
}

std::string GroundTruth::to_json() const {
    nlohmann::json sessions_json = nlohmann::json::array();
    for (const auto& s : sessions) {
        nlohmann::json j{{"kind", s.kind == SessionKind::Data ? "data" : "dns"},
                         {"client_port", s.client_port},
                         {"first_ts_us", s.first_ts_us},
                         {"packets", s.packets}};
        if (s.kind == SessionKind::Dns) j["domain"] = s.domain;
        sessions_json.push_back(std::move(j));
    }
    nlohmann::json j{{"category", category_name(category)},
                     {"mode", traffic_mode_name(mode)},
                     {"session_count", session_count},
                     {"data_packets", data_packets},
                     {"queried_domains", queried_domains},
                     {"sessions", std::move(sessions_json)}};
    return j.dump(2) + "\n";
}

GroundTruth generate_pcap(const TrafficProfile& profile, double duration_s, std::uint64_t seed,
                          const std::filesystem::path& out, const GeneratorOptions& options) {
    profile.validate();
    if (!(duration_s > 0)) throw InvalidArgument("duration must be > 0");
    if (!(options.idle_timeout_s > 0)) throw InvalidArgument("idle timeout must be > 0");

    SplitMix64 rng(seed);
    const double base_gap = 1.0 / profile.packet_rate_hz;
    // Every gap inside a session must stay under the idle timeout.
    const double max_gap = 0.9 * options.idle_timeout_s;

    struct DataPacket {
        double t;
        bool downlink;
        std::uint32_t size;
    };
    std::vector<DataPacket> data;
    double t = 0;
    for (std::size_t k = 0; t < duration_s; ++k) {
        DataPacket p{};
        p.t = t;
        p.downlink = rng.uniform() < profile.downlink_fraction;
        const double size = profile.packet_size_mean + profile.packet_size_std * rng.normal();
        p.size = static_cast<std::uint32_t>(std::lround(std::clamp(size, kMinPacketSize, kMaxPacketSize)));
        data.push_back(p);
        if (profile.burstiness == 0) {
            t = static_cast<double>(k + 1) * std::min(base_gap, max_gap);
        } else {
            const double b = profile.burstiness;
            const double gap = base_gap * std::exp(b * rng.normal() - b * b / 2);
            t += std::clamp(gap, 1e-3, max_gap);
        }
    }

    // Bucket data packets into sessions.
    std::map<std::size_t, std::vector<DataPacket>> sessions;
    for (const auto& p : data) {
        sessions[static_cast<std::size_t>(std::floor(p.t / profile.session_length_s))].push_back(p);
    }

    GroundTruth truth;
    truth.category = profile.category;
    truth.mode = profile.mode;
    truth.data_packets = data.size();

    std::vector<Emitted> frames;
    auto emit = [&](std::int64_t ts, const FrameSpec& spec) { frames.push_back({ts, build_frame(spec)}); };
    const Endpoint server{profile.server_ip, kServerPort};
    const std::uint16_t dns_answers = static_cast<std::uint16_t>(code(profile.category) + 1);

    std::map<std::string, std::int64_t> resolved_at;  // domain -> time of last lookup
    std::size_t ordinal = 0;
    for (const auto& [index, packets] : sessions) {
        const auto client_port = static_cast<std::uint16_t>(kFirstDataPort + ordinal);
        const Endpoint client{options.client_ip, client_port};
        const std::int64_t start = options.epoch_us + micros(packets.front().t);
        const std::int64_t end = options.epoch_us + micros(packets.back().t);

        if (!profile.dns_domains.empty()) {
            const auto& domains = profile.dns_domains;
            const std::string& domain =
                (domains.size() == 1 || ordinal % 3 != 2)
                    ? domains.front()
                    : domains[1 + (ordinal / 3) % (domains.size() - 1)];
            const auto cached = resolved_at.find(domain);
            if (cached == resolved_at.end() || start - cached->second >= micros(options.dns_ttl_s)) {
                resolved_at[domain] = start;
                const auto dns_port = static_cast<std::uint16_t>(kFirstDnsPort + ordinal);
                const Endpoint dns_client{options.client_ip, dns_port};
                const Endpoint resolver{options.resolver_ip, kDnsPort};
                const auto id = static_cast<std::uint16_t>(rng.below(65536));
                FrameSpec q;
                q.src = dns_client;
                q.dst = resolver;
                q.protocol = Protocol::UDP;
                q.payload = build_dns_query(id, domain);
                emit(start - 30'000, q);
                FrameSpec r;
                r.src = resolver;
                r.dst = dns_client;
                r.protocol = Protocol::UDP;
                r.payload = build_dns_response(id, domain, server.ip.value, dns_answers);
                emit(start - 20'000, r);
                truth.sessions.push_back({SessionKind::Dns, dns_port, start - 30'000, 2, domain});
                truth.queried_domains.push_back(domain);
            }
        }

        std::uint32_t cseq = static_cast<std::uint32_t>(rng.next());
        std::uint32_t sseq = static_cast<std::uint32_t>(rng.next());
        auto tcp = [&](bool from_client, std::uint8_t flags, std::uint32_t payload_len) {
            FrameSpec f;
            f.src = from_client ? client : server;
            f.dst = from_client ? server : client;
            f.tcp_flags = flags;
            f.tcp_window = from_client ? kClientWindow : kServerWindow;
            f.tcp_seq = from_client ? cseq : sseq;
            f.tcp_ack = from_client ? sseq : cseq;
            f.payload.assign(payload_len, 0);
            (from_client ? cseq : sseq) += payload_len + ((flags & (tcp_flag::SYN | tcp_flag::FIN)) ? 1 : 0);
            return f;
        };

        emit(start - 10'000, tcp(true, tcp_flag::SYN, 0));
        emit(start - 8'000, tcp(false, tcp_flag::SYN | tcp_flag::ACK, 0));
        emit(start - 6'000, tcp(true, tcp_flag::ACK, 0));
        for (const auto& p : packets) {
            emit(options.epoch_us + micros(p.t),
                 tcp(!p.downlink, tcp_flag::PSH | tcp_flag::ACK, p.size - kTcpIpHeaders));
        }
        emit(end + 2'000, tcp(true, tcp_flag::FIN | tcp_flag::ACK, 0));
        emit(end + 4'000, tcp(false, tcp_flag::FIN | tcp_flag::ACK, 0));
        truth.sessions.push_back({SessionKind::Data, client_port, start - 10'000, packets.size() + 5, {}});
        ++ordinal;
    }
    truth.session_count = truth.sessions.size();

    std::stable_sort(frames.begin(), frames.end(),
                     [](const Emitted& a, const Emitted& b) { return a.ts_us < b.ts_us; });
    PcapWriter writer(out);
    for (const auto& f : frames) writer.write(f.ts_us, f.frame);
    writer.close();
    return truth;
}

std::vector<ManifestRow> generate_corpus(std::uint64_t seed, int per_category_captures,
                                         const std::filesystem::path& out_dir,
                                         double capture_duration_s, double idle_timeout_s) {
    if (per_category_captures < 1) throw InvalidArgument("per_category_captures must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    SplitMix64 seeds(seed);
    std::vector<ManifestRow> rows;
    for (const auto category : kAllCategories) {
        for (const auto mode : {TrafficMode::Passive, TrafficMode::Active}) {
            for (int i = 0; i < per_category_captures; ++i) {
                ManifestRow row;
                row.label = category;
                row.mode = mode;
                row.seed = seeds.next();
                char name[96];
                std::snprintf(name, sizeof name, "%s_%s_%02d.pcap",
                              std::string(category_name(category)).c_str(),
                              std::string(traffic_mode_name(mode)).c_str(), i);
                row.file = name;

                GeneratorOptions options;
                options.idle_timeout_s = idle_timeout_s;
                options.client_ip = Ipv4{0x0A000000u | (static_cast<std::uint32_t>(code(category)) << 16) |
                                         ((mode == TrafficMode::Active ? 1u : 0u) << 8) |
                                         static_cast<std::uint32_t>(i + 1)};
                const auto truth = generate_pcap(builtin_profile(category, mode), capture_duration_s,
                                                 row.seed, out_dir / row.file, options);
                std::ofstream t(out_dir / (row.file + ".truth.json"), std::ios::trunc);
                t << truth.to_json();
                if (!t) throw IoError("cannot write ground truth for " + row.file);
                rows.push_back(std::move(row));
            }
        }
    }
    save_manifest(rows, out_dir / "manifest.csv");
    return rows;
}

void save_manifest(std::span<const ManifestRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << "file,label,mode,seed\n";
    for (const auto& r : rows) {
        out << r.file << ',' << category_name(r.label) << ',' << traffic_mode_name(r.mode) << ','
            << r.seed << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ManifestRow> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::vector<ManifestRow> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "file,label,mode,seed") throw ParseError(path.string() + ": bad manifest header");
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (auto pos = line.find(','); ; pos = line.find(',', start)) {
            cells.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (cells.size() != 4) throw ParseError(where + ": expected 4 columns");
        ManifestRow row;
        row.file = cells[0];
        const auto label = parse_category(cells[1]);
        const auto mode = parse_traffic_mode(cells[2]);
        if (!label || !mode) throw ParseError(where + ": bad label or mode");
        row.label = *label;
        row.mode = *mode;
        try {
            std::size_t used = 0;
            row.seed = std::stoull(cells[3], &used);
            if (used != cells[3].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(where + ": bad seed");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace iotscope

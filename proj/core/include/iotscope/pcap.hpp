#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "iotscope/common.hpp"

namespace iotscope {

enum class Protocol : std::uint8_t { TCP, UDP, OTHER };

std::string_view protocol_name(Protocol p) noexcept;

namespace tcp_flag {
inline constexpr std::uint8_t FIN = 0x01;
inline constexpr std::uint8_t SYN = 0x02;
inline constexpr std::uint8_t RST = 0x04;
inline constexpr std::uint8_t PSH = 0x08;
inline constexpr std::uint8_t ACK = 0x10;
inline constexpr std::uint8_t URG = 0x20;
inline constexpr std::uint8_t ECE = 0x40;
inline constexpr std::uint8_t CWR = 0x80;
}  // namespace tcp_flag

// One decoded Ethernet/IPv4 packet.
//
// payload_len == ip_total_len - header_len. For non-TCP packets tcp_flags and
// tcp_window are zero; for OTHER the ports are zero too. l4_payload is only
// retained for UDP (DNS matching needs it).
struct PacketRecord {
    std::int64_t timestamp_us = 0;
    Ipv4 src_ip;
    Ipv4 dst_ip;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Protocol protocol = Protocol::OTHER;
    std::uint32_t ip_total_len = 0;
    std::uint32_t header_len = 0;
    std::uint32_t payload_len = 0;
    std::uint8_t tcp_flags = 0;
    std::uint16_t tcp_window = 0;
    std::vector<std::uint8_t> l4_payload;

    Endpoint src() const noexcept { return {src_ip, src_port}; }
    Endpoint dst() const noexcept { return {dst_ip, dst_port}; }
    bool has_flag(std::uint8_t flag) const noexcept { return (tcp_flags & flag) != 0; }

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

struct PcapReadResult {
    std::vector<PacketRecord> packets;
    // Frames that were not IPv4, non-first IP fragments, or undecodable.
    std::size_t skipped = 0;
};

inline constexpr std::uint32_t kPcapMagicMicros = 0xA1B2C3D4;
inline constexpr std::uint32_t kPcapMagicNanos = 0xA1B23C4D;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;

// Throws MalformedPcap, UnsupportedLinkType, IoError.
PcapReadResult read_pcap(const std::filesystem::path& path);
PcapReadResult read_pcap(std::span<const std::uint8_t> bytes);

// Decodes one Ethernet frame. Returns nullopt for frames that read_pcap would
// skip.
std::optional<PacketRecord> decode_ethernet_frame(std::span<const std::uint8_t> frame,
                                                  std::int64_t timestamp_us);

// Field set for synthesizing an Ethernet/IPv4 frame.
struct FrameSpec {
    Endpoint src;
    Endpoint dst;
    Protocol protocol = Protocol::TCP;
    std::uint8_t tcp_flags = 0;
    std::uint16_t tcp_window = 0;
    std::uint32_t tcp_seq = 0;
    std::uint32_t tcp_ack = 0;
    std::vector<std::uint8_t> payload;
    // Raw IPv4 flags+fragment-offset field (host order); 0 = unfragmented.
    std::uint16_t ip_frag_field = 0;
};

// Builds a complete Ethernet II frame: 20-byte IPv4 header, 20-byte TCP or
// 8-byte UDP header, then payload. Checksums are filled in.
std::vector<std::uint8_t> build_frame(const FrameSpec& spec);

// Writes classic microsecond pcap files with Ethernet link type.
class PcapWriter {
public:
    explicit PcapWriter(const std::filesystem::path& path);
    ~PcapWriter();
    PcapWriter(const PcapWriter&) = delete;
    PcapWriter& operator=(const PcapWriter&) = delete;

    void write(std::int64_t timestamp_us, std::span<const std::uint8_t> frame);
    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

// In-memory variant used by tests.
std::vector<std::uint8_t> pcap_global_header(std::uint32_t magic = kPcapMagicMicros,
                                             std::uint32_t link_type = kLinkTypeEthernet);
void append_pcap_record(std::vector<std::uint8_t>& out, std::int64_t timestamp_us,
                        std::span<const std::uint8_t> frame);

}  // namespace iotscope

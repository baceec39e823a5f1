#include "iotscope/pcap.hpp"

#include <algorithm>
#include <iterator>

namespace iotscope {

std::string_view protocol_name(Protocol p) noexcept {
    switch (p) {
        case Protocol::TCP: return "TCP";
        case Protocol::UDP: return "UDP";
        case Protocol::OTHER: break;
    }
    return "OTHER";
}

namespace {

constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;
constexpr std::size_t kEthernetLen = 14;
constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
constexpr std::uint16_t kEtherTypeVlan = 0x8100;
constexpr std::uint8_t kIpProtoTcp = 6;
constexpr std::uint8_t kIpProtoUdp = 17;

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }
std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
}
std::uint32_t le32(const std::uint8_t* p) {
    return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[1]} << 8) |
           std::uint32_t{p[0]};
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    put16(out, static_cast<std::uint16_t>(v >> 16));
    put16(out, static_cast<std::uint16_t>(v));
}
void put32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint32_t checksum_add(std::uint32_t sum, std::span<const std::uint8_t> data) {
    std::size_t i = 0;
    for (; i + 1 < data.size(); i += 2) sum += be16(&data[i]);
    if (i < data.size()) sum += std::uint32_t{data[i]} << 8;
    return sum;
}

std::uint16_t checksum_fold(std::uint32_t sum) {
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

}  // namespace

std::optional<PacketRecord> decode_ethernet_frame(std::span<const std::uint8_t> frame,
                                                  std::int64_t timestamp_us) {
    if (frame.size() < kEthernetLen) return std::nullopt;
    std::size_t off = 12;
    std::uint16_t ether_type = be16(&frame[off]);
    off += 2;
    if (ether_type == kEtherTypeVlan) {
        if (frame.size() < off + 4) return std::nullopt;
        ether_type = be16(&frame[off + 2]);
        off += 4;
    }
    if (ether_type != kEtherTypeIpv4) return std::nullopt;

    const auto ip = frame.subspan(off);
    if (ip.size() < 20 || (ip[0] >> 4) != 4) return std::nullopt;
    const std::size_t ihl = std::size_t{ip[0] & 0x0Fu} * 4;
    const std::uint16_t total_len = be16(&ip[2]);
    if (ihl < 20 || ip.size() < ihl || total_len < ihl) return std::nullopt;
    if ((be16(&ip[6]) & 0x1FFF) != 0) return std::nullopt;  // non-first fragment

    PacketRecord rec;
    rec.timestamp_us = timestamp_us;
    rec.src_ip = Ipv4{be32(&ip[12])};
    rec.dst_ip = Ipv4{be32(&ip[16])};
    rec.ip_total_len = total_len;

    // Bytes of the IP datagram actually present in the capture.
    const auto datagram = ip.first(std::min<std::size_t>(ip.size(), total_len));
    const auto l4 = datagram.subspan(ihl);

    switch (ip[9]) {
        case kIpProtoTcp: {
            if (l4.size() < 20) return std::nullopt;
            const std::size_t data_off = static_cast<std::size_t>(l4[12] >> 4) * 4;
            if (data_off < 20 || ihl + data_off > total_len) return std::nullopt;
            rec.protocol = Protocol::TCP;
            rec.src_port = be16(&l4[0]);
            rec.dst_port = be16(&l4[2]);
            rec.tcp_flags = l4[13];
            rec.tcp_window = be16(&l4[14]);
            rec.header_len = static_cast<std::uint32_t>(ihl + data_off);
            break;
        }
        case kIpProtoUdp: {
            if (l4.size() < 8 || ihl + 8 > total_len) return std::nullopt;
            rec.protocol = Protocol::UDP;
            rec.src_port = be16(&l4[0]);
            rec.dst_port = be16(&l4[2]);
            rec.header_len = static_cast<std::uint32_t>(ihl + 8);
            rec.l4_payload.assign(l4.begin() + 8, l4.end());
            break;
        }
        default:
            rec.protocol = Protocol::OTHER;
            rec.header_len = static_cast<std::uint32_t>(ihl);
            break;
    }
    rec.payload_len = rec.ip_total_len - rec.header_len;
    return rec;
}

PcapReadResult read_pcap(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kGlobalHeaderLen) throw MalformedPcap("truncated pcap global header");

    bool swapped = false;
    bool nanos = false;
    const std::uint32_t magic_le = le32(bytes.data());
    const std::uint32_t magic_be = be32(bytes.data());
    if (magic_le == kPcapMagicMicros || magic_le == kPcapMagicNanos) {
        nanos = magic_le == kPcapMagicNanos;
    } else if (magic_be == kPcapMagicMicros || magic_be == kPcapMagicNanos) {
        swapped = true;
        nanos = magic_be == kPcapMagicNanos;
    } else {
        throw MalformedPcap("bad pcap magic");
    }
    auto rd32 = [swapped](const std::uint8_t* p) { return swapped ? be32(p) : le32(p); };

    const std::uint32_t link_type = rd32(bytes.data() + 20) & 0x0FFFFFFF;
    if (link_type != kLinkTypeEthernet) {
        throw UnsupportedLinkType("link type " + std::to_string(link_type) + " is not Ethernet");
    }

    PcapReadResult result;
    std::size_t off = kGlobalHeaderLen;
    while (off < bytes.size()) {
        if (bytes.size() - off < kRecordHeaderLen) {
            throw MalformedPcap("truncated record header at offset " + std::to_string(off));
        }
        const std::uint8_t* h = bytes.data() + off;
        const std::uint32_t ts_sec = rd32(h);
        const std::uint32_t ts_frac = rd32(h + 4);
        const std::uint32_t incl_len = rd32(h + 8);
        off += kRecordHeaderLen;
        if (incl_len > bytes.size() - off) {
            throw MalformedPcap("truncated record data at offset " + std::to_string(off));
        }
        const std::int64_t ts_us = std::int64_t{ts_sec} * 1'000'000 +
                                   (nanos ? std::int64_t{ts_frac} / 1000 : std::int64_t{ts_frac});
        auto rec = decode_ethernet_frame(bytes.subspan(off, incl_len), ts_us);
        off += incl_len;
        if (rec) {
            result.packets.push_back(std::move(*rec));
        } else {
            ++result.skipped;
        }
    }
    return result;
}

PcapReadResult read_pcap(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_pcap(std::span<const std::uint8_t>(bytes));
}

std::vector<std::uint8_t> build_frame(const FrameSpec& spec) {
    const bool tcp = spec.protocol == Protocol::TCP;
    const bool udp = spec.protocol == Protocol::UDP;
    const std::size_t l4_header = tcp ? 20 : (udp ? 8 : 0);
    const std::size_t total_len = 20 + l4_header + spec.payload.size();

    std::vector<std::uint8_t> f;
    f.reserve(kEthernetLen + total_len);
    for (std::uint8_t b : {0x02, 0x00, 0x00, 0x00, 0x00, 0x02}) f.push_back(b);
    for (std::uint8_t b : {0x02, 0x00, 0x00, 0x00, 0x00, 0x01}) f.push_back(b);
    put16(f, kEtherTypeIpv4);

    const std::size_t ip_off = f.size();
    f.push_back(0x45);
    f.push_back(0x00);
    put16(f, static_cast<std::uint16_t>(total_len));
    put16(f, 0x0000);
    put16(f, spec.ip_frag_field);
    f.push_back(64);
    f.push_back(tcp ? kIpProtoTcp : (udp ? kIpProtoUdp : 1));
    put16(f, 0x0000);
    put32(f, spec.src.ip.value);
    put32(f, spec.dst.ip.value);
    const std::uint16_t ip_sum =
        checksum_fold(checksum_add(0, std::span<const std::uint8_t>(f).subspan(ip_off, 20)));
    f[ip_off + 10] = static_cast<std::uint8_t>(ip_sum >> 8);
    f[ip_off + 11] = static_cast<std::uint8_t>(ip_sum);

    const std::size_t l4_off = f.size();
    if (tcp) {
        put16(f, spec.src.port);
        put16(f, spec.dst.port);
        put32(f, spec.tcp_seq);
        put32(f, spec.tcp_ack);
        f.push_back(0x50);
        f.push_back(spec.tcp_flags);
        put16(f, spec.tcp_window);
        put16(f, 0x0000);
        put16(f, 0x0000);
    } else if (udp) {
        put16(f, spec.src.port);
        put16(f, spec.dst.port);
        put16(f, static_cast<std::uint16_t>(8 + spec.payload.size()));
        put16(f, 0x0000);
    }
    f.insert(f.end(), spec.payload.begin(), spec.payload.end());

    if (tcp || udp) {
        const std::size_t l4_len = f.size() - l4_off;
        std::uint32_t sum = 0;
        sum += spec.src.ip.value >> 16;
        sum += spec.src.ip.value & 0xFFFF;
        sum += spec.dst.ip.value >> 16;
        sum += spec.dst.ip.value & 0xFFFF;
        sum += tcp ? kIpProtoTcp : kIpProtoUdp;
        sum += static_cast<std::uint32_t>(l4_len);
        sum = checksum_add(sum, std::span<const std::uint8_t>(f).subspan(l4_off));
        std::uint16_t l4_sum = checksum_fold(sum);
        if (udp && l4_sum == 0) l4_sum = 0xFFFF;
        const std::size_t at = l4_off + (tcp ? 16 : 6);
        f[at] = static_cast<std::uint8_t>(l4_sum >> 8);
        f[at + 1] = static_cast<std::uint8_t>(l4_sum);
    }
    return f;
}

std::vector<std::uint8_t> pcap_global_header(std::uint32_t magic, std::uint32_t link_type) {
    std::vector<std::uint8_t> out;
    put32le(out, magic);
    put16le(out, 2);
    put16le(out, 4);
    put32le(out, 0);
    put32le(out, 0);
    put32le(out, 65535);
    put32le(out, link_type);
    return out;
}

void append_pcap_record(std::vector<std::uint8_t>& out, std::int64_t timestamp_us,
                        std::span<const std::uint8_t> frame) {
    put32le(out, static_cast<std::uint32_t>(timestamp_us / 1'000'000));
    put32le(out, static_cast<std::uint32_t>(timestamp_us % 1'000'000));
    put32le(out, static_cast<std::uint32_t>(frame.size()));
    put32le(out, static_cast<std::uint32_t>(frame.size()));
    out.insert(out.end(), frame.begin(), frame.end());
}

PcapWriter::PcapWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw IoError("cannot create " + path.string());
    const auto header = pcap_global_header();
    out_.write(reinterpret_cast<const char*>(header.data()),
               static_cast<std::streamsize>(header.size()));
}

PcapWriter::~PcapWriter() {
    if (out_.is_open()) out_.close();
}

void PcapWriter::write(std::int64_t timestamp_us, std::span<const std::uint8_t> frame) {
    std::vector<std::uint8_t> rec;
    rec.reserve(kRecordHeaderLen + frame.size());
    append_pcap_record(rec, timestamp_us, frame);
    out_.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    if (!out_) throw IoError("write failed: " + path_.string());
}

void PcapWriter::close() {
    out_.close();
    if (out_.fail()) throw IoError("close failed: " + path_.string());
}

}  // namespace iotscope

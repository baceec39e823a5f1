#include "iotscope/dns.hpp"

#include <cctype>

#include "iotscope/common.hpp"

namespace iotscope {

namespace {

constexpr std::size_t kHeaderLen = 12;

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

std::optional<std::string> parse_dns_qname(std::span<const std::uint8_t> payload) {
    if (payload.size() < kHeaderLen) return std::nullopt;
    if (payload[2] & 0x80) return std::nullopt;  // QR: response
    const unsigned qdcount = (unsigned{payload[4]} << 8) | payload[5];
    if (qdcount == 0) return std::nullopt;

    std::string name;
    std::size_t off = kHeaderLen;
    std::size_t wire_len = 0;
    while (true) {
        if (off >= payload.size()) return std::nullopt;
        const std::uint8_t len = payload[off];
        ++wire_len;
        if (len == 0) break;
        if (len & 0xC0) return std::nullopt;  // pointer or reserved label type
        wire_len += len;
        if (wire_len > kMaxDnsNameLength) return std::nullopt;
        if (len > payload.size() - off - 1) return std::nullopt;
        if (!name.empty()) name.push_back('.');
        for (std::size_t i = 1; i <= len; ++i) {
            const auto ch = static_cast<char>(payload[off + i]);
            if (ch == '.') return std::nullopt;
            name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
        off += 1 + len;
    }
    // The 255-byte limit includes the terminating root label.
    if (wire_len > kMaxDnsNameLength || name.empty()) return std::nullopt;
    return name;
}

std::vector<std::uint8_t> encode_dns_name(std::string_view name) {
    std::vector<std::uint8_t> out;
    std::size_t start = 0;
    while (start <= name.size()) {
        auto dot = name.find('.', start);
        if (dot == std::string_view::npos) dot = name.size();
        const auto label = name.substr(start, dot - start);
        if (label.empty() || label.size() > 63) {
            throw InvalidArgument("invalid DNS label in '" + std::string(name) + "'");
        }
        out.push_back(static_cast<std::uint8_t>(label.size()));
        out.insert(out.end(), label.begin(), label.end());
        start = dot + 1;
    }
    out.push_back(0);
    if (out.size() > kMaxDnsNameLength) throw InvalidArgument("DNS name too long");
    return out;
}

std::vector<std::uint8_t> build_dns_query(std::uint16_t id, std::string_view name) {
    std::vector<std::uint8_t> out;
    put16(out, id);
    put16(out, 0x0100);  // RD
    put16(out, 1);
    put16(out, 0);
    put16(out, 0);
    put16(out, 0);
    const auto qname = encode_dns_name(name);
    out.insert(out.end(), qname.begin(), qname.end());
    put16(out, 1);  // A
    put16(out, 1);  // IN
    return out;
}

std::vector<std::uint8_t> build_dns_response(std::uint16_t id, std::string_view name,
                                             std::uint32_t first_address, int answers) {
    std::vector<std::uint8_t> out;
    put16(out, id);
    put16(out, 0x8180);  // QR, RD, RA
    put16(out, 1);
    put16(out, static_cast<std::uint16_t>(answers));
    put16(out, 0);
    put16(out, 0);
    const auto qname = encode_dns_name(name);
    out.insert(out.end(), qname.begin(), qname.end());
    put16(out, 1);
    put16(out, 1);
    for (int i = 0; i < answers; ++i) {
        put16(out, 0xC00C);  // pointer to the question name
        put16(out, 1);
        put16(out, 1);
        put16(out, 0);
        put16(out, 300);  // TTL
        put16(out, 4);
        const std::uint32_t addr = first_address + static_cast<std::uint32_t>(i);
        put16(out, static_cast<std::uint16_t>(addr >> 16));
        put16(out, static_cast<std::uint16_t>(addr));
    }
    return out;
}

}  // namespace iotscope

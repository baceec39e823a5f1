#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iotscope {

inline constexpr std::uint16_t kDnsPort = 53;
inline constexpr std::size_t kMaxDnsNameLength = 255;  // wire format, RFC 1035

// First QNAME of a DNS query (QR = 0, QDCOUNT >= 1), lowercased and
// dot-joined. Returns nullopt for responses, garbage, compression pointers in
// the question, empty names, labels containing '.', or names whose wire form
// exceeds 255 bytes. Never reads past the payload.
std::optional<std::string> parse_dns_qname(std::span<const std::uint8_t> udp_payload);

// Encodes a domain name as length-prefixed labels ending in the root label.
// Throws InvalidArgument for empty labels, labels over 63 bytes or names over
// 255 bytes.
std::vector<std::uint8_t> encode_dns_name(std::string_view name);

// A standard recursive query (type A, class IN) for one name.
std::vector<std::uint8_t> build_dns_query(std::uint16_t id, std::string_view name);

// A response echoing the question followed by `answers` A records pointing at
// consecutive addresses from `first_address`.
std::vector<std::uint8_t> build_dns_response(std::uint16_t id, std::string_view name,
                                             std::uint32_t first_address, int answers);

}  // namespace iotscope

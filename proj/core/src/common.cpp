#include "iotscope/common.hpp"

#include <charconv>
#include <cstdio>

namespace iotscope {

namespace {
constexpr std::array<std::string_view, kNumCategories> kCategoryNames{
    "Surveillance", "Hub", "EnergyManagement", "Appliance", "StreamingDevices", "NonIoT",
};
}  // namespace

std::string_view category_name(Category c) noexcept {
    return kCategoryNames[static_cast<std::size_t>(code(c))];
}

Category category_from_code(int value) {
    if (value < 0 || value >= kNumCategories) {
        throw InvalidArgument("category code out of range: " + std::to_string(value));
    }
    return static_cast<Category>(value);
}

std::optional<Category> parse_category(std::string_view name) {
    for (int i = 0; i < kNumCategories; ++i) {
        if (kCategoryNames[static_cast<std::size_t>(i)] == name) return static_cast<Category>(i);
    }
    return std::nullopt;
}

std::string to_string(Ipv4 ip) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (ip.value >> 24) & 0xFF,
                  (ip.value >> 16) & 0xFF, (ip.value >> 8) & 0xFF, ip.value & 0xFF);
    return buf;
}

std::optional<Ipv4> parse_ipv4(std::string_view text) {
    std::uint32_t value = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        if (p == end || *p < '0' || *p > '9') return std::nullopt;
        unsigned part = 0;
        auto [next, ec] = std::from_chars(p, end, part);
        if (ec != std::errc{} || part > 255 || next - p > 3) return std::nullopt;
        p = next;
        value = (value << 8) | part;
    }
    if (p != end) return std::nullopt;
    return Ipv4{value};
}

std::string to_string(const Endpoint& ep) {
    return to_string(ep.ip) + ":" + std::to_string(ep.port);
}

}  // namespace iotscope

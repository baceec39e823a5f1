#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace iotscope {

// Base of every domain error. name() is the stable error identifier that the
// CLI surfaces to users (e.g. "MalformedPcap").
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(what), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

#define IOTSCOPE_DEFINE_ERROR(Type)                                            \
    class Type : public Error {                                                \
    public:                                                                    \
        explicit Type(const std::string& what) : Error(#Type, what) {}         \
    }

IOTSCOPE_DEFINE_ERROR(MalformedPcap);
IOTSCOPE_DEFINE_ERROR(UnsupportedLinkType);
IOTSCOPE_DEFINE_ERROR(IoError);
IOTSCOPE_DEFINE_ERROR(EmptyDataset);
IOTSCOPE_DEFINE_ERROR(ClassTooSmall);
IOTSCOPE_DEFINE_ERROR(TooFewSamples);
IOTSCOPE_DEFINE_ERROR(DivergenceDetected);
IOTSCOPE_DEFINE_ERROR(SchemaVersionMismatch);
IOTSCOPE_DEFINE_ERROR(CorruptModelFile);
IOTSCOPE_DEFINE_ERROR(LengthMismatch);
IOTSCOPE_DEFINE_ERROR(EmptyInput);
IOTSCOPE_DEFINE_ERROR(ParseError);
IOTSCOPE_DEFINE_ERROR(InvalidRegex);
IOTSCOPE_DEFINE_ERROR(RuleSyntaxError);
IOTSCOPE_DEFINE_ERROR(InvalidArgument);

#undef IOTSCOPE_DEFINE_ERROR

// Device category. The integer codes are stable and used in model files.
enum class Category : std::uint8_t {
    Surveillance = 0,
    Hub = 1,
    EnergyManagement = 2,
    Appliance = 3,
    StreamingDevices = 4,
    NonIoT = 5,
};

inline constexpr int kNumCategories = 6;

inline constexpr std::array<Category, kNumCategories> kAllCategories{
    Category::Surveillance,     Category::Hub,
    Category::EnergyManagement, Category::Appliance,
    Category::StreamingDevices, Category::NonIoT,
};

constexpr int code(Category c) noexcept { return static_cast<int>(c); }
std::string_view category_name(Category c) noexcept;
Category category_from_code(int code);
std::optional<Category> parse_category(std::string_view name);

// IPv4 address in host byte order.
struct Ipv4 {
    std::uint32_t value = 0;

    friend constexpr auto operator<=>(const Ipv4&, const Ipv4&) = default;
};

std::string to_string(Ipv4 ip);
std::optional<Ipv4> parse_ipv4(std::string_view text);

struct Endpoint {
    Ipv4 ip;
    std::uint16_t port = 0;

    friend constexpr auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

std::string to_string(const Endpoint& ep);

}  // namespace iotscope

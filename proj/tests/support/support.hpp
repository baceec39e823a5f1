#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "iotscope/dataset.hpp"
#include "iotscope/pcap.hpp"
#include "iotscope/rng.hpp"

namespace iotscope::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("iotscope-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Ipv4 ip(const char* text) { return *parse_ipv4(text); }

inline PacketRecord tcp_packet(std::int64_t ts_us, const char* src, std::uint16_t sport,
                               const char* dst, std::uint16_t dport, std::uint8_t flags = 0,
                               std::uint32_t total_len = 40, std::uint16_t window = 1024) {
    PacketRecord p;
    p.timestamp_us = ts_us;
    p.src_ip = ip(src);
    p.dst_ip = ip(dst);
    p.src_port = sport;
    p.dst_port = dport;
    p.protocol = Protocol::TCP;
    p.ip_total_len = total_len;
    p.header_len = 40;
    p.payload_len = total_len - 40;
    p.tcp_flags = flags;
    p.tcp_window = window;
    return p;
}

inline PacketRecord udp_packet(std::int64_t ts_us, const char* src, std::uint16_t sport,
                               const char* dst, std::uint16_t dport,
                               std::vector<std::uint8_t> payload = {}) {
    PacketRecord p;
    p.timestamp_us = ts_us;
    p.src_ip = ip(src);
    p.dst_ip = ip(dst);
    p.src_port = sport;
    p.dst_port = dport;
    p.protocol = Protocol::UDP;
    p.header_len = 28;
    p.payload_len = static_cast<std::uint32_t>(payload.size());
    p.ip_total_len = 28 + p.payload_len;
    p.l4_payload = std::move(payload);
    return p;
}

// Gaussian blobs, one per class, in `dims` dimensions. Class c is centered at
// `spread * c` on every axis; rows are interleaved by class.
struct Blobs {
    Matrix x;
    std::vector<Category> y;
};

inline Blobs make_blobs(std::size_t per_class, std::size_t dims, double spread, double noise,
                        std::uint64_t seed, int classes = kNumCategories) {
    SplitMix64 rng(seed);
    Blobs b;
    b.x = Matrix(per_class * static_cast<std::size_t>(classes), dims);
    std::size_t r = 0;
    for (std::size_t i = 0; i < per_class; ++i) {
        for (int c = 0; c < classes; ++c, ++r) {
            for (std::size_t d = 0; d < dims; ++d) b.x(r, d) = spread * c + noise * rng.normal();
            b.y.push_back(category_from_code(c));
        }
    }
    return b;
}

inline Dataset to_dataset(const Matrix& x, std::span<const Category> y) {
    Dataset ds;
    for (std::size_t i = 0; i < x.rows; ++i) {
        LabeledSample s;
        for (std::size_t j = 0; j < x.cols && j < kNumFeatures; ++j) s.features.values[j] = x(i, j);
        s.label = y[i];
        s.origin = "row#" + std::to_string(i);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
    const double diff = std::fabs(a - b);
    return diff <= abs_floor || diff <= rel * std::max(std::fabs(a), std::fabs(b));
}

}  // namespace iotscope::testing

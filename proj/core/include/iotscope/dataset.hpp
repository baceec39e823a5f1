#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "iotscope/features.hpp"

namespace iotscope {

inline constexpr int kDatasetSchemaVersion = 1;

struct LabeledSample {
    FeatureVector features;
    Category label = Category::NonIoT;
    // Provenance: capture file name and flow index ("capture.pcap#3").
    std::string origin;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    int schema_version = kDatasetSchemaVersion;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    std::array<std::size_t, kNumCategories> class_counts() const noexcept;
    std::vector<Category> labels() const;

    void append(const Dataset& other);
};

Dataset label_flows(std::span<const FeatureVector> features, Category label,
                    const std::string& origin);

// Dense row-major matrix; models accept any column count so tests can work
// with truncated schemas.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<double> row(std::size_t i) noexcept { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data.data() + i * cols, cols};
    }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols + j]; }
};

Matrix feature_matrix(const Dataset& ds);

// Per-class round-half-up counts, with at least one sample of each class kept
// on each side.
struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_indices;  // positions in the input, ascending
    std::vector<std::size_t> test_indices;
};

// For each class c (in code order) the class's sample positions are shuffled
// with one SplitMix64(seed) stream; the first round(fraction * n_c) go to
// train. Throws ClassTooSmall when a present class has fewer than 2 samples.
SplitResult stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed);

std::size_t stratified_train_count(std::size_t class_size, double train_fraction) noexcept;

// Standardization with population standard deviation. Zero-variance columns
// store std = 1, so they are only centered.
struct Scaler {
    std::vector<double> means;
    std::vector<double> stds;

    std::size_t width() const noexcept { return means.size(); }
    void apply_inplace(std::span<double> row) const;
    std::vector<double> apply(std::span<const double> row) const;
    FeatureVector apply(const FeatureVector& v) const;
    std::vector<double> invert(std::span<const double> row) const;
    Matrix apply(const Matrix& m) const;

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

Scaler fit_scaler(const Matrix& train);
Scaler fit_scaler(const Dataset& train);
FeatureVector apply_scaler(const Scaler& s, const FeatureVector& v);

// Dataset CSV: the 63 feature columns then a mandatory `label` column with the
// category name. Origins are reconstructed as "<file>#<row>".
Dataset load_dataset_csv(const std::filesystem::path& path);
void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

// Mixed captures: maps device IPs to categories. A flow takes the label of the
// first of (initiator, responder) that appears in the map.
using DeviceMap = std::map<Ipv4, Category>;
DeviceMap load_device_map(const std::filesystem::path& path);
Dataset label_by_device_map(const Extraction& extraction, const DeviceMap& map,
                            const std::string& origin);

}  // namespace iotscope

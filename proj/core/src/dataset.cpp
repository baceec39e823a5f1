#include "iotscope/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "iotscope/rng.hpp"

namespace iotscope {

std::array<std::size_t, kNumCategories> Dataset::class_counts() const noexcept {
    std::array<std::size_t, kNumCategories> counts{};
    for (const auto& s : samples) ++counts[static_cast<std::size_t>(code(s.label))];
    return counts;
}

std::vector<Category> Dataset::labels() const {
    std::vector<Category> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

void Dataset::append(const Dataset& other) {
    samples.insert(samples.end(), other.samples.begin(), other.samples.end());
}

Dataset label_flows(std::span<const FeatureVector> features, Category label,
                    const std::string& origin) {
    Dataset ds;
    ds.samples.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        ds.samples.push_back({features[i], label, origin + "#" + std::to_string(i)});
    }
    return ds;
}

Matrix feature_matrix(const Dataset& ds) {
    Matrix m(ds.size(), kNumFeatures);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::copy(ds.samples[i].features.values.begin(), ds.samples[i].features.values.end(),
                  m.row(i).begin());
    }
    return m;
}

std::size_t stratified_train_count(std::size_t class_size, double train_fraction) noexcept {
    const auto n = static_cast<double>(class_size);
    // The slack keeps exact halves such as 0.7 * 45 from rounding down.
    const double exact = train_fraction * n;
    auto count = static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9 * std::max(1.0, exact)));
    if (class_size >= 2) count = std::clamp<std::size_t>(count, 1, class_size - 1);
    return count;
}

SplitResult stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InvalidArgument("train_fraction must lie in (0, 1)");
    }
    std::array<std::vector<std::size_t>, kNumCategories> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        by_class[static_cast<std::size_t>(code(ds.samples[i].label))].push_back(i);
    }
    for (int c = 0; c < kNumCategories; ++c) {
        const auto n = by_class[static_cast<std::size_t>(c)].size();
        if (n == 1) {
            throw ClassTooSmall(std::string(category_name(static_cast<Category>(c))) +
                                " has fewer than 2 samples");
        }
    }

    SplitResult out;
    SplitMix64 rng(seed);
    for (auto& members : by_class) {
        if (members.empty()) continue;
        rng.shuffle(std::span<std::size_t>(members));
        const std::size_t n_train = stratified_train_count(members.size(), train_fraction);
        out.train_indices.insert(out.train_indices.end(), members.begin(),
                                 members.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test_indices.insert(out.test_indices.end(),
                                members.begin() + static_cast<std::ptrdiff_t>(n_train),
                                members.end());
    }
    std::sort(out.train_indices.begin(), out.train_indices.end());
    std::sort(out.test_indices.begin(), out.test_indices.end());
    for (auto i : out.train_indices) out.train.samples.push_back(ds.samples[i]);
    for (auto i : out.test_indices) out.test.samples.push_back(ds.samples[i]);
    return out;
}

void Scaler::apply_inplace(std::span<double> row) const {
    if (row.size() != width()) throw InvalidArgument("scaler width mismatch");
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - means[j]) / stds[j];
}

std::vector<double> Scaler::apply(std::span<const double> row) const {
    std::vector<double> out(row.begin(), row.end());
    apply_inplace(out);
    return out;
}

FeatureVector Scaler::apply(const FeatureVector& v) const {
    FeatureVector out = v;
    apply_inplace(out.values);
    return out;
}

std::vector<double> Scaler::invert(std::span<const double> row) const {
    if (row.size() != width()) throw InvalidArgument("scaler width mismatch");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] * stds[j] + means[j];
    return out;
}

Matrix Scaler::apply(const Matrix& m) const {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows; ++i) apply_inplace(out.row(i));
    return out;
}

Scaler fit_scaler(const Matrix& train) {
    if (train.rows == 0) throw EmptyDataset("cannot fit a scaler on an empty training set");
    Scaler s;
    s.means.assign(train.cols, 0.0);
    s.stds.assign(train.cols, 0.0);
    const auto n = static_cast<double>(train.rows);
    for (std::size_t i = 0; i < train.rows; ++i) {
        for (std::size_t j = 0; j < train.cols; ++j) s.means[j] += train(i, j);
    }
    for (auto& m : s.means) m /= n;
    for (std::size_t i = 0; i < train.rows; ++i) {
        for (std::size_t j = 0; j < train.cols; ++j) {
            const double d = train(i, j) - s.means[j];
            s.stds[j] += d * d;
        }
    }
    for (auto& sd : s.stds) {
        sd = std::sqrt(sd / n);
        if (!(sd > 0.0)) sd = 1.0;
    }
    return s;
}

Scaler fit_scaler(const Dataset& train) { return fit_scaler(feature_matrix(train)); }

FeatureVector apply_scaler(const Scaler& s, const FeatureVector& v) { return s.apply(v); }

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

double parse_real(std::string_view text, const std::string& where) {
    double value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw ParseError(where + ": not a finite number: '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

Dataset load_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");

    const auto header = split_commas(trim_cr(line));
    const auto& names = feature_names();
    bool header_ok = header.size() == kNumFeatures + 1 && header.back() == "label";
    for (std::size_t i = 0; header_ok && i < kNumFeatures; ++i) header_ok = header[i] == names[i];
    if (!header_ok) {
        throw ParseError(path.string() + ": header must be the 63 feature columns then 'label'");
    }

    Dataset ds;
    const std::string file = path.filename().string();
    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim_cr(line);
        if (text.empty()) continue;
        const auto cells = split_commas(text);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (cells.size() != kNumFeatures + 1) throw ParseError(where + ": wrong column count");
        LabeledSample s;
        for (std::size_t j = 0; j < kNumFeatures; ++j) s.features.values[j] = parse_real(cells[j], where);
        const auto label = parse_category(cells.back());
        if (!label) throw ParseError(where + ": unknown label '" + std::string(cells.back()) + "'");
        s.label = *label;
        s.origin = file + "#" + std::to_string(row++);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    write_feature_csv_header(out, true);
    for (const auto& s : ds.samples) write_feature_csv_row(out, s.features, category_name(s.label));
    if (!out) throw IoError("write failed: " + path.string());
}

DeviceMap load_device_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    DeviceMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim_cr(line);
        if (text.empty() || text.front() == '#') continue;
        const auto cells = split_commas(text);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (cells.size() != 2) throw ParseError(where + ": expected 'ip,label'");
        if (line_no == 1 && cells[0] == "ip") continue;
        const auto ip = parse_ipv4(cells[0]);
        const auto label = parse_category(cells[1]);
        if (!ip) throw ParseError(where + ": bad IPv4 address");
        if (!label) throw ParseError(where + ": unknown label");
        map[*ip] = *label;
    }
    return map;
}

Dataset label_by_device_map(const Extraction& extraction, const DeviceMap& map,
                            const std::string& origin) {
    Dataset ds;
    for (std::size_t i = 0; i < extraction.flows.size(); ++i) {
        const auto& flow = extraction.flows[i].flow;
        auto it = map.find(flow.initiator.ip);
        if (it == map.end()) it = map.find(flow.responder().ip);
        if (it == map.end()) continue;
        ds.samples.push_back({extraction.flows[i].features, it->second, origin + "#" + std::to_string(i)});
    }
    return ds;
}

}  // namespace iotscope

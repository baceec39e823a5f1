#include "iotscope/model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace iotscope {

using nlohmann::json;

std::string_view model_kind_name(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::RandomForest: return "rf";
        case ModelKind::Mlp: return "mlp";
        case ModelKind::Knn: break;
    }
    return "knn";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) noexcept {
    if (name == "rf") return ModelKind::RandomForest;
    if (name == "mlp") return ModelKind::Mlp;
    if (name == "knn") return ModelKind::Knn;
    return std::nullopt;
}

ModelKind kind_of(const ModelParams& p) noexcept { return static_cast<ModelKind>(p.index()); }
ModelKind kind_of(const Model& m) noexcept { return static_cast<ModelKind>(m.index()); }

ModelParams params_of(const Model& m) {
    return std::visit([](const auto& model) -> ModelParams { return model.params; }, m);
}

ModelParams default_params(ModelKind kind) {
    switch (kind) {
        case ModelKind::RandomForest: return ForestParams{};
        case ModelKind::Mlp: return MlpParams{};
        case ModelKind::Knn: break;
    }
    return KnnParams{};
}

namespace {

[[noreturn]] void bad_value(std::string_view name, std::string_view value) {
    throw InvalidArgument("invalid value '" + std::string(value) + "' for parameter " +
                          std::string(name));
}

template <typename T>
T parse_number(std::string_view name, std::string_view text) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) bad_value(name, text);
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) bad_value(name, text);
    }
    return value;
}

std::string real_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::optional<KnnAlgorithm> parse_algorithm(std::string_view s) {
    if (s == "auto") return KnnAlgorithm::Auto;
    if (s == "brute") return KnnAlgorithm::BruteForce;
    if (s == "kd_tree") return KnnAlgorithm::KdTree;
    return std::nullopt;
}

void set_forest(ForestParams& p, std::string_view name, std::string_view value) {
    if (name == "n_trees") p.n_trees = parse_number<int>(name, value);
    else if (name == "max_features") p.max_features = parse_number<int>(name, value);
    else if (name == "max_depth")
        p.max_depth = value == "none" ? std::nullopt : std::optional<int>(parse_number<int>(name, value));
    else if (name == "min_samples_leaf") p.min_samples_leaf = parse_number<int>(name, value);
    else if (name == "seed") p.seed = parse_number<std::uint64_t>(name, value);
    else throw InvalidArgument("unknown rf parameter: " + std::string(name));
}

void set_mlp(MlpParams& p, std::string_view name, std::string_view value) {
    if (name == "hidden_layers") p.hidden_layers = parse_number<int>(name, value);
    else if (name == "hidden_neurons") p.hidden_neurons = parse_number<int>(name, value);
    else if (name == "activation") { if (value != "relu") bad_value(name, value); }
    else if (name == "optimizer") { if (value != "adam") bad_value(name, value); }
    else if (name == "learning_rate") p.learning_rate = parse_number<double>(name, value);
    else if (name == "beta1") p.beta1 = parse_number<double>(name, value);
    else if (name == "beta2") p.beta2 = parse_number<double>(name, value);
    else if (name == "epsilon") p.epsilon = parse_number<double>(name, value);
    else if (name == "batch_size") p.batch_size = parse_number<int>(name, value);
    else if (name == "max_epochs") p.max_epochs = parse_number<int>(name, value);
    else if (name == "seed") p.seed = parse_number<std::uint64_t>(name, value);
    else throw InvalidArgument("unknown mlp parameter: " + std::string(name));
}

void set_knn(KnnParams& p, std::string_view name, std::string_view value) {
    if (name == "k") p.k = parse_number<int>(name, value);
    else if (name == "weights") { if (value != "uniform") bad_value(name, value); }
    else if (name == "algorithm") {
        const auto a = parse_algorithm(value);
        if (!a) bad_value(name, value);
        p.algorithm = *a;
    } else if (name == "minkowski_p") p.minkowski_p = parse_number<double>(name, value);
    else throw InvalidArgument("unknown knn parameter: " + std::string(name));
}

json params_json(const ModelParams& params) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            json j;
            if constexpr (std::is_same_v<T, ForestParams>) {
                j["n_trees"] = p.n_trees;
                j["max_features"] = p.max_features;
                j["max_depth"] = p.max_depth ? json(*p.max_depth) : json(nullptr);
                j["min_samples_leaf"] = p.min_samples_leaf;
                j["seed"] = p.seed;
            } else if constexpr (std::is_same_v<T, MlpParams>) {
                j["hidden_layers"] = p.hidden_layers;
                j["hidden_neurons"] = p.hidden_neurons;
                j["activation"] = "relu";
                j["optimizer"] = "adam";
                j["learning_rate"] = p.learning_rate;
                j["beta1"] = p.beta1;
                j["beta2"] = p.beta2;
                j["epsilon"] = p.epsilon;
                j["batch_size"] = p.batch_size;
                j["max_epochs"] = p.max_epochs;
                j["seed"] = p.seed;
            } else {
                j["k"] = p.k;
                j["weights"] = "uniform";
                j["algorithm"] = std::string(knn_algorithm_name(p.algorithm));
                j["minkowski_p"] = p.minkowski_p;
            }
            return j;
        },
        params);
}

}  // namespace

void set_param(ModelParams& params, std::string_view name, std::string_view value) {
    std::visit(
        [&](auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ForestParams>) set_forest(p, name, value);
            else if constexpr (std::is_same_v<T, MlpParams>) set_mlp(p, name, value);
            else set_knn(p, name, value);
        },
        params);
}

void set_seed(ModelParams& params, std::uint64_t seed) {
    if (auto* f = std::get_if<ForestParams>(&params)) f->seed = seed;
    if (auto* m = std::get_if<MlpParams>(&params)) m->seed = seed;
}

std::map<std::string, std::string> describe_params(const ModelParams& params) {
    std::map<std::string, std::string> out;
    const json j = params_json(params);
    for (const auto& [key, value] : j.items()) {
        if (value.is_null()) out[key] = "none";
        else if (value.is_string()) out[key] = value.get<std::string>();
        else if (value.is_number_float()) out[key] = real_text(value.get<double>());
        else out[key] = value.dump();
    }
    return out;
}

Model train(const Matrix& x, std::span<const Category> y, const ModelParams& params) {
    return std::visit(
        [&](const auto& p) -> Model {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ForestParams>) return train_forest(x, y, p);
            else if constexpr (std::is_same_v<T, MlpParams>) return train_mlp(x, y, p);
            else return train_knn(x, y, p);
        },
        params);
}

Model train(const Dataset& ds, const ModelParams& params) {
    const auto labels = ds.labels();
    return train(feature_matrix(ds), labels, params);
}

Category predict(const Model& model, std::span<const double> raw) {
    return std::visit(
        [&](const auto& m) -> Category {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ForestModel>) return predict_forest(m, raw).label;
            else if constexpr (std::is_same_v<T, MlpModel>) return predict_mlp(m, raw).label;
            else return predict_knn(m, raw).label;
        },
        model);
}

Category predict(const Model& model, const FeatureVector& v) {
    return predict(model, std::span<const double>(v.values));
}

std::vector<Category> predict_all(const Model& model, const Dataset& ds) {
    std::vector<Category> out;
    out.reserve(ds.size());
    for (const auto& s : ds.samples) out.push_back(predict(model, s.features));
    return out;
}

namespace {

json matrix_json(const Matrix& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from(const json& j) {
    Matrix m;
    m.rows = j.at("rows").get<std::size_t>();
    m.cols = j.at("cols").get<std::size_t>();
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) throw CorruptModelFile("matrix size mismatch");
    return m;
}

json payload_json(const Model& model) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ForestModel>) {
                json trees = json::array();
                for (const auto& tree : m.trees) {
                    json nodes = json::array();
                    for (const auto& n : tree.nodes) {
                        if (n.is_leaf()) {
                            nodes.push_back(json{{"counts", n.class_counts}});
                        } else {
                            nodes.push_back(json{{"feature", n.feature},
                                                 {"threshold", n.threshold},
                                                 {"left", n.left},
                                                 {"right", n.right}});
                        }
                    }
                    trees.push_back(json{{"nodes", std::move(nodes)}});
                }
                return json{{"trees", std::move(trees)}};
            } else if constexpr (std::is_same_v<T, MlpModel>) {
                return json{{"w1", matrix_json(m.w1)},
                            {"b1", m.b1},
                            {"w2", matrix_json(m.w2)},
                            {"b2", m.b2}};
            } else {
                std::vector<int> labels;
                for (auto c : m.labels) labels.push_back(code(c));
                return json{{"train", matrix_json(m.train)},
                            {"labels", labels},
                            {"resolved_algorithm", knn_algorithm_name(m.resolved)}};
            }
        },
        model);
}

void check(bool ok, const char* what) {
    if (!ok) throw CorruptModelFile(what);
}

ModelParams params_from(ModelKind kind, const json& j) {
    ModelParams p = default_params(kind);
    for (const auto& [key, value] : j.items()) {
        std::string text;
        if (value.is_null()) text = "none";
        else if (value.is_string()) text = value.get<std::string>();
        else if (value.is_number_float()) text = real_text(value.get<double>());
        else text = value.dump();
        set_param(p, key, text);
    }
    return p;
}

Model model_from(ModelKind kind, const ModelParams& params, Scaler scaler, const json& payload) {
    const std::size_t width = scaler.width();
    switch (kind) {
        case ModelKind::RandomForest: {
            ForestModel m;
            m.params = std::get<ForestParams>(params);
            m.scaler = std::move(scaler);
            for (const auto& t : payload.at("trees")) {
                DecisionTree tree;
                for (const auto& n : t.at("nodes")) {
                    TreeNode node;
                    if (n.contains("counts")) {
                        node.class_counts = n.at("counts").get<ClassCounts>();
                        std::uint64_t total = 0;
                        for (auto c : node.class_counts) total += c;
                        check(total >= 1, "empty leaf");
                    } else {
                        node.feature = n.at("feature").get<int>();
                        node.threshold = n.at("threshold").get<double>();
                        node.left = n.at("left").get<std::int32_t>();
                        node.right = n.at("right").get<std::int32_t>();
                        check(node.feature >= 0 && static_cast<std::size_t>(node.feature) < width,
                              "split feature out of range");
                    }
                    tree.nodes.push_back(node);
                }
                check(!tree.nodes.empty(), "empty tree");
                for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
                    const auto& n = tree.nodes[i];
                    if (n.is_leaf()) continue;
                    const auto size = static_cast<std::int32_t>(tree.nodes.size());
                    check(n.left > static_cast<std::int32_t>(i) && n.left < size &&
                              n.right > static_cast<std::int32_t>(i) && n.right < size,
                          "child index out of range");
                }
                m.trees.push_back(std::move(tree));
            }
            check(m.trees.size() == static_cast<std::size_t>(m.params.n_trees), "tree count mismatch");
            return m;
        }
        case ModelKind::Mlp: {
            MlpModel m;
            m.params = std::get<MlpParams>(params);
            m.scaler = std::move(scaler);
            m.w1 = matrix_from(payload.at("w1"));
            m.b1 = payload.at("b1").get<std::vector<double>>();
            m.w2 = matrix_from(payload.at("w2"));
            m.b2 = payload.at("b2").get<std::vector<double>>();
            check(m.w1.rows == width && m.b1.size() == m.w1.cols && m.w2.rows == m.w1.cols &&
                      m.w2.cols == kNumCategories && m.b2.size() == kNumCategories,
                  "MLP dimensions inconsistent");
            return m;
        }
        case ModelKind::Knn: break;
    }
    KnnModel m;
    m.params = std::get<KnnParams>(params);
    m.scaler = std::move(scaler);
    m.train = matrix_from(payload.at("train"));
    for (int c : payload.at("labels").get<std::vector<int>>()) {
        check(c >= 0 && c < kNumCategories, "label code out of range");
        m.labels.push_back(static_cast<Category>(c));
    }
    check(m.train.cols == width && m.labels.size() == m.train.rows, "KNN dimensions inconsistent");
    check(m.train.rows >= static_cast<std::size_t>(m.params.k), "fewer stored samples than k");
    rebuild_index(m);
    return m;
}

}  // namespace

std::string serialize_model(const Model& model) {
    const auto& scaler = std::visit([](const auto& m) -> const Scaler& { return m.scaler; }, model);
    json j;
    j["format_version"] = kModelFormatVersion;
    j["model_kind"] = std::string(model_kind_name(kind_of(model)));
    j["params"] = params_json(params_of(model));
    j["scaler"] = json{{"means", scaler.means}, {"stds", scaler.stds}};
    j["payload"] = payload_json(model);
    return j.dump() + "\n";
}

Model deserialize_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw CorruptModelFile(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        check(j.is_object() && j.contains("format_version"), "missing format_version");
        const auto& version = j.at("format_version");
        if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion) {
            throw SchemaVersionMismatch("unsupported model format_version " + version.dump() +
                                        " (expected " + std::to_string(kModelFormatVersion) + ")");
        }
        const auto kind = parse_model_kind(j.at("model_kind").get<std::string>());
        check(kind.has_value(), "unknown model_kind");
        ModelParams params = params_from(*kind, j.at("params"));
        Scaler scaler;
        scaler.means = j.at("scaler").at("means").get<std::vector<double>>();
        scaler.stds = j.at("scaler").at("stds").get<std::vector<double>>();
        check(scaler.means.size() == scaler.stds.size() && !scaler.means.empty(),
              "scaler dimensions inconsistent");
        for (double s : scaler.stds) check(s > 0 && std::isfinite(s), "scaler std must be > 0");
        return model_from(*kind, params, std::move(scaler), j.at("payload"));
    } catch (const json::exception& e) {
        throw CorruptModelFile(std::string("malformed model file: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw CorruptModelFile(std::string("malformed model parameters: ") + e.what());
    }
}

void save_model(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << serialize_model(model);
    if (!out) throw IoError("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace iotscope

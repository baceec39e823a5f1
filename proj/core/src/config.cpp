#include "iotscope/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace iotscope {

namespace {

using nlohmann::json;

constexpr std::array<ModelKind, 3> kKinds{ModelKind::RandomForest, ModelKind::Mlp, ModelKind::Knn};

std::string scalar_text(const json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_null()) return "none";
    throw ParseError(where + ": expected a string or number");
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read_number(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ParseError(where + "." + key + ": expected a number");
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
            throw ParseError(where + "." + key + ": expected an integer");
        }
        if (std::is_unsigned_v<T> && v.is_number_integer() && v.get<std::int64_t>() < 0) {
            throw InvalidArgument(where + "." + key + ": must be non-negative");
        }
    }
    out = v.get<T>();
}

ModelKind kind_key(const std::string& key, const std::string& where) {
    const auto kind = parse_model_kind(key);
    if (!kind) throw ParseError(where + ": unknown model kind '" + key + "'");
    return *kind;
}

}  // namespace

Config::Config() {
    for (auto kind : kKinds) {
        models.emplace(kind, default_params(kind));
        grids.emplace(kind, default_grid(kind));
    }
}

void Config::validate() const {
    flow.validate();
    if (!(split_fraction > 0 && split_fraction < 1)) {
        throw InvalidArgument("split fraction must lie in (0, 1)");
    }
    if (folds < 2) throw InvalidArgument("folds must be >= 2");
    for (auto kind : kKinds) {
        GridSpec spec;
        spec.model_kind = kind;
        spec.grid = grid(kind);
        spec.folds = folds;
        spec.base = params(kind);
        spec.validate();
        std::visit(
            [](const auto& p) {
                if constexpr (std::is_same_v<std::decay_t<decltype(p)>, ForestParams>) {
                    p.validate(kNumFeatures);
                } else {
                    p.validate();
                }
            },
            params(kind));
    }
}

Config parse_config(std::string_view json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    check_keys(root, {"flow", "split", "models", "grids", "folds"}, "config");

    Config cfg;
    try {
        if (root.contains("flow")) {
            const auto& f = root.at("flow");
            check_keys(f,
                       {"idle_timeout_s", "activity_timeout_s", "subflow_gap_s", "bulk_gap_s",
                        "bulk_min_packets"},
                       "flow");
            read_number(f, "idle_timeout_s", cfg.flow.idle_timeout_s, "flow");
            read_number(f, "activity_timeout_s", cfg.flow.activity_timeout_s, "flow");
            read_number(f, "subflow_gap_s", cfg.flow.subflow_gap_s, "flow");
            read_number(f, "bulk_gap_s", cfg.flow.bulk_gap_s, "flow");
            read_number(f, "bulk_min_packets", cfg.flow.bulk_min_packets, "flow");
        }
        if (root.contains("split")) {
            const auto& s = root.at("split");
            check_keys(s, {"fraction", "seed"}, "split");
            read_number(s, "fraction", cfg.split_fraction, "split");
            read_number(s, "seed", cfg.split_seed, "split");
        }
        read_number(root, "folds", cfg.folds, "config");
        if (root.contains("models")) {
            const auto& m = root.at("models");
            check_keys(m, {"rf", "mlp", "knn"}, "models");
            for (const auto& [key, overrides] : m.items()) {
                const std::string where = "models." + key;
                auto& params = cfg.models.at(kind_key(key, where));
                if (!overrides.is_object()) throw ParseError(where + ": expected an object");
                for (const auto& [name, value] : overrides.items()) {
                    set_param(params, name, scalar_text(value, where + "." + name));
                }
            }
        }
        if (root.contains("grids")) {
            const auto& g = root.at("grids");
            check_keys(g, {"rf", "mlp", "knn"}, "grids");
            for (const auto& [key, grid] : g.items()) {
                const std::string where = "grids." + key;
                if (!grid.is_object()) throw ParseError(where + ": expected an object");
                ParamGrid parsed;
                for (const auto& [name, values] : grid.items()) {
                    if (!values.is_array()) throw ParseError(where + "." + name + ": expected an array");
                    auto& out = parsed[name];
                    for (const auto& v : values) out.push_back(scalar_text(v, where + "." + name));
                }
                cfg.grids[kind_key(key, where)] = std::move(parsed);
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

Config load_config_from_env() {
    const char* path = std::getenv(std::string(kConfigEnvVar).c_str());
    if (path == nullptr || *path == '\0') return Config{};
    return load_config(path);
}

}  // namespace iotscope

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>

#include "iotscope/forest.hpp"
#include "iotscope/knn.hpp"
#include "iotscope/mlp.hpp"

namespace iotscope {

enum class ModelKind : std::uint8_t { RandomForest, Mlp, Knn };

std::string_view model_kind_name(ModelKind k) noexcept;  // "rf", "mlp", "knn"
std::optional<ModelKind> parse_model_kind(std::string_view name) noexcept;

using ModelParams = std::variant<ForestParams, MlpParams, KnnParams>;
using Model = std::variant<ForestModel, MlpModel, KnnModel>;

ModelKind kind_of(const ModelParams& p) noexcept;
ModelKind kind_of(const Model& m) noexcept;
ModelParams params_of(const Model& m);

ModelParams default_params(ModelKind kind);

// Sets one hyperparameter by name from its text form, e.g. ("n_trees", "500")
// or ("algorithm", "kd_tree"). Throws InvalidArgument for unknown names or
// unparsable values.
void set_param(ModelParams& params, std::string_view name, std::string_view value);
void set_seed(ModelParams& params, std::uint64_t seed);

// Hyperparameters by name, values in the text form set_param accepts.
std::map<std::string, std::string> describe_params(const ModelParams& params);

Model train(const Dataset& train, const ModelParams& params);
Model train(const Matrix& x, std::span<const Category> y, const ModelParams& params);

Category predict(const Model& model, std::span<const double> raw);
Category predict(const Model& model, const FeatureVector& v);
std::vector<Category> predict_all(const Model& model, const Dataset& ds);

// Model file: JSON object {format_version, model_kind, params, scaler, payload}.
inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const Model& model);
Model deserialize_model(std::string_view text);  // SchemaVersionMismatch, CorruptModelFile
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace iotscope

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "iotscope/model.hpp"

namespace iotscope {

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::size_t support = 0;  // true samples of this class
};

using ConfusionMatrix = std::array<std::array<std::size_t, kNumCategories>, kNumCategories>;

// Rows are true classes, columns predicted classes. Every 0/0 metric is 0;
// macro averages run over all six classes, weighted averages use support.
struct EvalReport {
    double accuracy = 0;
    std::array<ClassMetrics, kNumCategories> per_class{};
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    double weighted_precision = 0;
    double weighted_recall = 0;
    double weighted_f1 = 0;
    ConfusionMatrix confusion{};
    std::size_t n_samples = 0;
};

EvalReport evaluate(std::span<const Category> predictions, std::span<const Category> truths);

std::string report_to_json(const EvalReport& report);
void print_report(std::ostream& out, const EvalReport& report);

struct CrossValidation {
    std::vector<EvalReport> folds;
    double mean_accuracy = 0;
};

// Fold id per sample. Each class's members are shuffled with one
// SplitMix64(seed) stream (classes in code order), the shuffled lists are
// concatenated, and the i-th sample of the concatenation goes to fold
// i mod folds.
std::vector<std::size_t> stratified_folds(std::span<const Category> labels, std::size_t folds,
                                          std::uint64_t seed);

// Requires every present class to have at least `folds` members, except for
// leave-one-out (folds == sample count). The scaler is refit inside every
// fold because each model fits its own.
CrossValidation cross_validate(const Matrix& x, std::span<const Category> y,
                               const ModelParams& params, std::size_t folds, std::uint64_t seed);
CrossValidation cross_validate(const Dataset& ds, const ModelParams& params, std::size_t folds,
                               std::uint64_t seed);

// Parameter grid: name -> candidate values (text form, see set_param).
using ParamGrid = std::map<std::string, std::vector<std::string>>;
using GridPoint = std::map<std::string, std::string>;

struct GridSpec {
    ModelKind model_kind = ModelKind::RandomForest;
    ParamGrid grid;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    // Starting point that grid values override; defaults when empty.
    std::optional<ModelParams> base;

    void validate() const;
};

struct GridRow {
    GridPoint point;
    double mean_accuracy = 0;
};

struct GridResult {
    std::vector<GridRow> table;  // in iteration order
    std::size_t best_index = 0;
    ModelParams best_params;
};

// Enumerates the Cartesian product with parameters sorted by name and the last
// name varying fastest; values keep their given order. The best row has the
// highest mean accuracy, ties to the earliest row.
std::vector<GridPoint> enumerate_grid(const ParamGrid& grid);
GridResult grid_search(const Dataset& ds, const GridSpec& spec);
GridResult grid_search(const Matrix& x, std::span<const Category> y, const GridSpec& spec);

ParamGrid default_grid(ModelKind kind);

}  // namespace iotscope

#include "iotscope/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "iotscope/rng.hpp"

namespace iotscope {

namespace {
double safe_div(double num, double den) { return den > 0 ? num / den : 0.0; }
}  // namespace

EvalReport evaluate(std::span<const Category> predictions, std::span<const Category> truths) {
    if (predictions.size() != truths.size()) {
        throw LengthMismatch("predictions and truths differ in length");
    }
    if (truths.empty()) throw EmptyInput("nothing to evaluate");

    EvalReport r;
    r.n_samples = truths.size();
    for (std::size_t i = 0; i < truths.size(); ++i) {
        ++r.confusion[static_cast<std::size_t>(code(truths[i]))]
                     [static_cast<std::size_t>(code(predictions[i]))];
    }

    std::size_t correct = 0;
    const double n = static_cast<double>(r.n_samples);
    for (std::size_t c = 0; c < kNumCategories; ++c) {
        const double tp = static_cast<double>(r.confusion[c][c]);
        std::size_t row = 0, col = 0;
        for (std::size_t k = 0; k < kNumCategories; ++k) {
            row += r.confusion[c][k];
            col += r.confusion[k][c];
        }
        correct += r.confusion[c][c];
        auto& m = r.per_class[c];
        m.support = row;
        m.precision = safe_div(tp, static_cast<double>(col));
        m.recall = safe_div(tp, static_cast<double>(row));
        m.f1 = safe_div(2 * m.precision * m.recall, m.precision + m.recall);

        r.macro_precision += m.precision / kNumCategories;
        r.macro_recall += m.recall / kNumCategories;
        r.macro_f1 += m.f1 / kNumCategories;
        const double w = static_cast<double>(row) / n;
        r.weighted_precision += w * m.precision;
        r.weighted_recall += w * m.recall;
        r.weighted_f1 += w * m.f1;
    }
    r.accuracy = static_cast<double>(correct) / n;
    return r;
}

std::string report_to_json(const EvalReport& r) {
    using nlohmann::json;
    json per_class = json::object();
    for (std::size_t c = 0; c < kNumCategories; ++c) {
        const auto& m = r.per_class[c];
        per_class[std::string(category_name(static_cast<Category>(c)))] = {
            {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
    }
    json labels = json::array();
    for (auto c : kAllCategories) labels.push_back(std::string(category_name(c)));
    json j{
        {"accuracy", r.accuracy},
        {"n_samples", r.n_samples},
        {"per_class", per_class},
        {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}},
        {"weighted",
         {{"precision", r.weighted_precision}, {"recall", r.weighted_recall}, {"f1", r.weighted_f1}}},
        {"confusion", {{"labels", labels}, {"matrix", r.confusion}}},
    };
    return j.dump(2) + "\n";
}

void print_report(std::ostream& out, const EvalReport& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "accuracy: %.4f  (n = %zu)\n\n", r.accuracy, r.n_samples);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-18s %9s %9s %9s %9s\n", "class", "precision", "recall", "f1",
                  "support");
    out << buf;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
        const auto& m = r.per_class[c];
        std::snprintf(buf, sizeof buf, "%-18s %9.4f %9.4f %9.4f %9zu\n",
                      std::string(category_name(static_cast<Category>(c))).c_str(), m.precision,
                      m.recall, m.f1, m.support);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%-18s %9.4f %9.4f %9.4f\n", "macro avg", r.macro_precision,
                  r.macro_recall, r.macro_f1);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-18s %9.4f %9.4f %9.4f\n\n", "weighted avg",
                  r.weighted_precision, r.weighted_recall, r.weighted_f1);
    out << buf;

    out << "confusion (rows = true, cols = predicted)\n";
    std::snprintf(buf, sizeof buf, "%-18s", "");
    out << buf;
    for (auto c : kAllCategories) {
        std::snprintf(buf, sizeof buf, " %8.8s", std::string(category_name(c)).c_str());
        out << buf;
    }
    out << '\n';
    for (std::size_t t = 0; t < kNumCategories; ++t) {
        std::snprintf(buf, sizeof buf, "%-18s",
                      std::string(category_name(static_cast<Category>(t))).c_str());
        out << buf;
        for (std::size_t p = 0; p < kNumCategories; ++p) {
            std::snprintf(buf, sizeof buf, " %8zu", r.confusion[t][p]);
            out << buf;
        }
        out << '\n';
    }
}

std::vector<std::size_t> stratified_folds(std::span<const Category> labels, std::size_t folds,
                                          std::uint64_t seed) {
    if (folds < 2) throw InvalidArgument("folds must be >= 2");
    std::array<std::vector<std::size_t>, kNumCategories> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class[static_cast<std::size_t>(code(labels[i]))].push_back(i);
    }
    const bool leave_one_out = folds == labels.size();
    for (std::size_t c = 0; c < kNumCategories; ++c) {
        const auto n = by_class[c].size();
        if (!leave_one_out && n > 0 && n < folds) {
            throw ClassTooSmall(std::string(category_name(static_cast<Category>(c))) + " has " +
                                std::to_string(n) + " samples, fewer than " +
                                std::to_string(folds) + " folds");
        }
    }
    if (labels.size() < folds) throw ClassTooSmall("fewer samples than folds");

    SplitMix64 rng(seed);
    std::vector<std::size_t> assignment(labels.size());
    std::size_t next = 0;
    for (auto& members : by_class) {
        rng.shuffle(std::span<std::size_t>(members));
        for (auto i : members) assignment[i] = next++ % folds;
    }
    return assignment;
}

CrossValidation cross_validate(const Matrix& x, std::span<const Category> y,
                               const ModelParams& params, std::size_t folds, std::uint64_t seed) {
    if (y.size() != x.rows) throw LengthMismatch("feature rows and labels differ in length");
    const auto assignment = stratified_folds(y, folds, seed);

    CrossValidation cv;
    for (std::size_t fold = 0; fold < folds; ++fold) {
        std::size_t n_test = 0;
        for (auto a : assignment) n_test += a == fold;
        Matrix train_x(x.rows - n_test, x.cols), test_x(n_test, x.cols);
        std::vector<Category> train_y, test_y;
        for (std::size_t i = 0, tr = 0, te = 0; i < x.rows; ++i) {
            const auto src = x.row(i);
            if (assignment[i] == fold) {
                std::copy(src.begin(), src.end(), test_x.row(te++).begin());
                test_y.push_back(y[i]);
            } else {
                std::copy(src.begin(), src.end(), train_x.row(tr++).begin());
                train_y.push_back(y[i]);
            }
        }
        const Model model = train(train_x, train_y, params);
        std::vector<Category> predicted;
        for (std::size_t i = 0; i < test_x.rows; ++i) predicted.push_back(predict(model, test_x.row(i)));
        cv.folds.push_back(evaluate(predicted, test_y));
        cv.mean_accuracy += cv.folds.back().accuracy;
    }
    cv.mean_accuracy /= static_cast<double>(folds);
    return cv;
}

CrossValidation cross_validate(const Dataset& ds, const ModelParams& params, std::size_t folds,
                               std::uint64_t seed) {
    const auto labels = ds.labels();
    return cross_validate(feature_matrix(ds), labels, params, folds, seed);
}

void GridSpec::validate() const {
    if (grid.empty()) throw InvalidArgument("parameter grid is empty");
    for (const auto& [name, values] : grid) {
        if (values.empty()) throw InvalidArgument("no values for grid parameter " + name);
    }
    if (folds < 2) throw InvalidArgument("folds must be >= 2");
    if (base && kind_of(*base) != model_kind) throw InvalidArgument("base params do not match model kind");
    // Unknown names and unparsable values surface here rather than mid-search.
    auto probe = base ? *base : default_params(model_kind);
    for (const auto& [name, values] : grid) {
        for (const auto& v : values) set_param(probe, name, v);
    }
}

std::vector<GridPoint> enumerate_grid(const ParamGrid& grid) {
    std::vector<GridPoint> points{GridPoint{}};
    for (const auto& [name, values] : grid) {  // std::map: sorted by name
        std::vector<GridPoint> next;
        for (const auto& partial : points) {
            for (const auto& v : values) {
                GridPoint p = partial;
                p[name] = v;
                next.push_back(std::move(p));
            }
        }
        points = std::move(next);
    }
    return points;
}

GridResult grid_search(const Matrix& x, std::span<const Category> y, const GridSpec& spec) {
    spec.validate();
    const ModelParams base = spec.base ? *spec.base : default_params(spec.model_kind);

    GridResult result;
    std::optional<ModelParams> best;
    for (auto& point : enumerate_grid(spec.grid)) {
        ModelParams params = base;
        for (const auto& [name, value] : point) set_param(params, name, value);
        const double acc = cross_validate(x, y, params, spec.folds, spec.seed).mean_accuracy;
        if (!best || acc > result.table[result.best_index].mean_accuracy) {
            result.best_index = result.table.size();
            best = params;
        }
        result.table.push_back({std::move(point), acc});
    }
    result.best_params = *best;
    return result;
}

GridResult grid_search(const Dataset& ds, const GridSpec& spec) {
    const auto labels = ds.labels();
    return grid_search(feature_matrix(ds), labels, spec);
}

ParamGrid default_grid(ModelKind kind) {
    switch (kind) {
        case ModelKind::RandomForest: return {{"n_trees", {"100", "200", "500"}}};
        case ModelKind::Mlp: return {{"hidden_neurons", {"50", "100"}}};
        case ModelKind::Knn: break;
    }
    return {{"k", {"3", "5", "7"}}};
}

}  // namespace iotscope

#include <gtest/gtest.h>

#include <json.hpp>

#include "iotscope/model.hpp"
#include "support.hpp"

using namespace iotscope;
using namespace iotscope::testing;

namespace {

ModelParams small_params(ModelKind kind) {
    auto p = default_params(kind);
    if (kind == ModelKind::RandomForest) {
        set_param(p, "n_trees", "5");
        set_param(p, "max_features", "3");
    }
    if (kind == ModelKind::Mlp) {
        set_param(p, "hidden_neurons", "12");
        set_param(p, "max_epochs", "10");
    }
    return p;
}

}  // namespace

TEST(Model, KindNames) {
    for (auto k : {ModelKind::RandomForest, ModelKind::Mlp, ModelKind::Knn}) {
        EXPECT_EQ(parse_model_kind(model_kind_name(k)), k);
    }
    EXPECT_EQ(model_kind_name(ModelKind::RandomForest), "rf");
    EXPECT_FALSE(parse_model_kind("svm").has_value());
}

TEST(Model, SaveLoadPreservesPredictions) {
    const auto b = make_blobs(8, 5, 3.0, 1.0, 21);
    const auto q = make_blobs(5, 5, 3.0, 2.0, 22);
    TempDir dir("model");
    for (auto kind : {ModelKind::RandomForest, ModelKind::Mlp, ModelKind::Knn}) {
        const auto m = train(b.x, b.y, small_params(kind));
        const auto path = dir.path() / "model.json";
        save_model(m, path);
        const auto loaded = load_model(path);
        EXPECT_EQ(kind_of(loaded), kind);
        EXPECT_EQ(params_of(loaded), params_of(m));
        for (std::size_t i = 0; i < q.x.rows; ++i) {
            EXPECT_EQ(predict(loaded, q.x.row(i)), predict(m, q.x.row(i)));
        }
        EXPECT_EQ(serialize_model(loaded), serialize_model(m));
    }
}

TEST(Model, MlpWeightsSurviveExactly) {
    const auto b = make_blobs(8, 5, 3.0, 1.0, 23);
    const auto m = std::get<MlpModel>(train(b.x, b.y, small_params(ModelKind::Mlp)));
    const auto back = std::get<MlpModel>(deserialize_model(serialize_model(Model{m})));
    EXPECT_EQ(back.w1.data, m.w1.data);
    EXPECT_EQ(back.w2.data, m.w2.data);
    EXPECT_EQ(back.b1, m.b1);
    EXPECT_EQ(back.b2, m.b2);
    EXPECT_EQ(back.scaler, m.scaler);
}

TEST(Model, RejectsUnknownVersion) {
    const auto b = make_blobs(2, 2, 3.0, 1.0, 1);
    auto j = nlohmann::json::parse(serialize_model(train(b.x, b.y, default_params(ModelKind::Knn))));
    EXPECT_EQ(j.at("format_version"), kModelFormatVersion);
    j["format_version"] = 7;
    EXPECT_THROW(deserialize_model(j.dump()), SchemaVersionMismatch);
}

TEST(Model, RejectsCorruptFiles) {
    const auto b = make_blobs(2, 2, 3.0, 1.0, 1);
    const auto text = serialize_model(train(b.x, b.y, default_params(ModelKind::Knn)));
    EXPECT_THROW(deserialize_model(text.substr(0, text.size() / 2)), CorruptModelFile);
    EXPECT_THROW(deserialize_model(""), CorruptModelFile);
    EXPECT_THROW(deserialize_model("[1, 2]"), CorruptModelFile);
    EXPECT_THROW(deserialize_model(R"({"format_version": 1, "model_kind": "svm"})"), CorruptModelFile);
    TempDir dir("model");
    EXPECT_THROW(load_model(dir.path() / "absent.json"), IoError);
}

TEST(Model, SetParamAndDescribe) {
    auto p = default_params(ModelKind::Knn);
    set_param(p, "k", "7");
    set_param(p, "algorithm", "kd_tree");
    set_param(p, "minkowski_p", "1");
    const auto& knn = std::get<KnnParams>(p);
    EXPECT_EQ(knn.k, 7);
    EXPECT_EQ(knn.algorithm, KnnAlgorithm::KdTree);
    EXPECT_EQ(knn.minkowski_p, 1.0);
    const auto d = describe_params(p);
    EXPECT_EQ(d.at("k"), "7");
    EXPECT_EQ(d.at("algorithm"), "kd_tree");

    EXPECT_THROW(set_param(p, "depth", "3"), InvalidArgument);
    EXPECT_THROW(set_param(p, "k", "seven"), InvalidArgument);

    auto rf = default_params(ModelKind::RandomForest);
    set_param(rf, "max_depth", "4");
    EXPECT_EQ(std::get<ForestParams>(rf).max_depth, 4);
    set_param(rf, "max_depth", "none");
    EXPECT_FALSE(std::get<ForestParams>(rf).max_depth.has_value());

    // describe and set are inverses.
    for (auto kind : {ModelKind::RandomForest, ModelKind::Mlp, ModelKind::Knn}) {
        auto q = default_params(kind);
        set_seed(q, 99);
        auto r = default_params(kind);
        for (const auto& [name, value] : describe_params(q)) set_param(r, name, value);
        EXPECT_EQ(r, q);
    }
}

TEST(Model, RandomForestDefaults) {
    const auto d = describe_params(default_params(ModelKind::RandomForest));
    EXPECT_EQ(d.at("n_trees"), "200");
    EXPECT_EQ(d.at("max_features"), "63");
}

TEST(Model, DatasetOverloadMatchesMatrix) {
    const auto b = make_blobs(4, 3, 3.0, 1.0, 5);
    const auto ds = to_dataset(b.x, b.y);
    const auto p = default_params(ModelKind::Knn);
    EXPECT_EQ(serialize_model(train(ds, p)), serialize_model(train(feature_matrix(ds), ds.labels(), p)));
}

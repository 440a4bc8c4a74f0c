#include "doctest.h"

#include "riskgrid/checkpoint.hpp"
#include "riskgrid/rng.hpp"

using namespace riskgrid;

namespace {

ModelBundle make_bundle() {
    ModelBundle b;
    QISpec qi;
    qi.selected = {0, 3, 7};
    qi.latent_len = 2;
    auto model = std::make_unique<QidnnModel>(BaseDNNSpec{10, 6, 8, 4}, qi, 99);
    model->screened_pairs = {{2, 5}, {1, 9}};
    auto rng = make_rng(99, "bundle");
    for (Param* p : model->params())
        for (double& v : p->value.data) v = normal01(rng);
    b.model = std::move(model);
    b.feature_indices = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    b.schema_fingerprint = 0xDEADBEEF12345678ULL;
    b.stats.resize(10);
    for (std::size_t i = 0; i < 10; ++i)
        b.stats[i] = FeatureStats{double(i), 1.0 + double(i), double(i % 3), 100};
    b.meta.seed = 99;
    b.meta.epochs_run = 17;
    b.meta.best_epoch = 12;
    b.meta.final_train_loss = 0.25;
    b.meta.best_val_loss = 0.31;
    b.meta.test_fraction = 0.2;
    b.meta.split_seed = 99;
    b.meta.data_checksum = "0011223344556677";
    return b;
}

} // namespace

TEST_CASE("checkpoint json round trip preserves the model exactly") {
    auto bundle = make_bundle();
    auto j = checkpoint_to_json(bundle);
    auto restored = checkpoint_from_json(j);

    CHECK(restored.kind() == ModelKind::qidnn);
    CHECK(restored.schema_fingerprint == bundle.schema_fingerprint);
    CHECK(restored.feature_indices == bundle.feature_indices);
    CHECK(restored.meta.best_epoch == 12);
    CHECK(restored.meta.data_checksum == "0011223344556677");

    auto pa = bundle.model->params();
    auto pb = restored.model->params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->id == pb[i]->id);
        CHECK(pa[i]->value.data == pb[i]->value.data);
    }

    // identical forward behaviour after the round trip
    auto rng = make_rng(3, "ckpt_fwd");
    Tensor X = Tensor::zeros(4, 10);
    for (double& v : X.data) v = normal01(rng);
    auto la = bundle.model->predict_risk_logits(X);
    auto lb = restored.model->predict_risk_logits(X);
    CHECK(la.data == lb.data);

    // serialization is stable
    CHECK(checkpoint_to_json(restored).dump() == j.dump());
}

TEST_CASE("checkpoint rejects shape drift") {
    auto bundle = make_bundle();
    auto j = checkpoint_to_json(bundle);
    j["parameters"]["V"]["data"].push_back(1.0);
    CHECK_THROWS_AS(checkpoint_from_json(j), compat_error);

    auto j2 = checkpoint_to_json(bundle);
    j2["parameters"].erase("wf");
    CHECK_THROWS_AS(checkpoint_from_json(j2), compat_error);

    auto j3 = checkpoint_to_json(bundle);
    j3["model_kind"] = "tree";
    CHECK_THROWS_AS(checkpoint_from_json(j3), compat_error);
}

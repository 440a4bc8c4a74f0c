#ifndef RISKGRID_CHECKPOINT_HPP
#define RISKGRID_CHECKPOINT_HPP

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "riskgrid/dataset.hpp"
#include "riskgrid/errors.hpp"
#include "riskgrid/models.hpp"
#include "riskgrid/training.hpp"

namespace riskgrid {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kCheckpointFormatVersion = 1;

struct TrainMeta {
    std::uint64_t seed = 0;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double final_train_loss = 0.0;
    double best_val_loss = 0.0;
    double test_fraction = 0.15;
    std::uint64_t split_seed = 0;
    std::string data_checksum; // of the training csv
};

// A trained model plus everything needed to run it on fresh rows: the raw
// column subset it consumes, the training-set statistics that normalize
// them, and the schema fingerprint that guards against drift.
struct ModelBundle {
    std::unique_ptr<Model> model;
    std::vector<std::size_t> feature_indices;
    std::uint64_t schema_fingerprint = 0;
    std::vector<FeatureStats> stats;
    TrainMeta meta;

    ModelKind kind() const { return model->kind(); }

    // Rows of a (raw) dataset mapped into model space.
    Tensor model_matrix(const Dataset& ds, const std::vector<std::size_t>& rows) const {
        Dataset prepared = normalize(impute(ds, stats), stats);
        Dataset sub = prepared.subset(rows);
        return sub.matrix(feature_indices);
    }

    std::vector<double> model_baseline(const FeatureSchema& schema) const {
        auto base = baseline_vector(schema, stats);
        std::vector<double> out(feature_indices.size());
        for (std::size_t j = 0; j < feature_indices.size(); ++j)
            out[j] = base[feature_indices[j]];
        return out;
    }
};

namespace detail {

inline ordered_json qi_to_json(const QISpec& qi) {
    return ordered_json{{"selected", qi.selected},
                        {"latent_len", qi.latent_len},
                        {"mode", qi.mode == QIMode::summed ? "summed" : "per_pair"}};
}

inline QISpec qi_from_json(const ordered_json& j) {
    QISpec qi;
    qi.selected = j.at("selected").get<std::vector<std::size_t>>();
    qi.latent_len = j.at("latent_len").get<std::size_t>();
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "summed")
        qi.mode = QIMode::summed;
    else if (mode == "per_pair")
        qi.mode = QIMode::per_pair;
    else
        throw compat_error("checkpoint: unknown qi mode '" + mode + "'");
    return qi;
}

inline ordered_json pairs_to_json(const std::vector<std::pair<std::size_t, std::size_t>>& ps) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : ps) arr.push_back(ordered_json::array({p.first, p.second}));
    return arr;
}

inline std::vector<std::pair<std::size_t, std::size_t>> pairs_from_json(const ordered_json& j) {
    std::vector<std::pair<std::size_t, std::size_t>> ps;
    for (const auto& e : j) ps.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    return ps;
}

} // namespace detail

inline ordered_json checkpoint_to_json(ModelBundle& bundle) {
    ordered_json spec;
    Model& m = *bundle.model;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (m.kind() == ModelKind::base_dnn) {
        auto& b = dynamic_cast<BaseDnnModel&>(m);
        spec = ordered_json{{"input_dim", b.spec.input_dim},
                            {"hidden_dim", b.spec.hidden_dim},
                            {"viz_dim", b.spec.viz_dim},
                            {"num_classes", b.spec.num_classes}};
    } else if (m.kind() == ModelKind::qidnn) {
        auto& q = dynamic_cast<QidnnModel&>(m);
        spec = ordered_json{{"input_dim", q.trunk.input_dim},
                            {"hidden_dim", q.trunk.hidden_dim},
                            {"viz_dim", q.trunk.viz_dim},
                            {"num_classes", q.trunk.num_classes},
                            {"qi", detail::qi_to_json(q.qi)},
                            {"screened_pairs", detail::pairs_to_json(q.screened_pairs)}};
    } else {
        auto& mm = dynamic_cast<MmoeModel&>(m);
        spec = ordered_json{{"input_dim", mm.spec.input_dim},
                            {"expert1_hidden", mm.spec.expert1_hidden},
                            {"rep_width", mm.spec.rep_width},
                            {"trunk_hidden", mm.spec.trunk_hidden},
                            {"trunk_viz", mm.spec.trunk_viz},
                            {"qi", detail::qi_to_json(mm.spec.expert2_qi)},
                            {"screened_pairs", detail::pairs_to_json(mm.screened_pairs)}};
    }

    ordered_json stats = ordered_json::array();
    for (const auto& s : bundle.stats)
        stats.push_back(ordered_json{
            {"mean", s.mean}, {"stddev", s.stddev}, {"mode", s.mode}, {"count", s.count}});

    ordered_json params;
    for (Param* p : m.params())
        params[p->id] = ordered_json{{"shape", p->value.shape}, {"data", p->value.data}};

    char fp[32];
    std::snprintf(fp, sizeof fp, "%016llx",
                  static_cast<unsigned long long>(bundle.schema_fingerprint));

    return ordered_json{
        {"format_version", kCheckpointFormatVersion},
        {"model_kind", model_kind_name(m.kind())},
        {"spec", spec},
        {"feature_indices", bundle.feature_indices},
        {"schema_fingerprint", fp},
        {"normalization_stats", stats},
        {"parameters", params},
        {"training",
         ordered_json{{"seed", bundle.meta.seed},
                      {"epochs_run", bundle.meta.epochs_run},
                      {"best_epoch", bundle.meta.best_epoch},
                      {"final_train_loss", bundle.meta.final_train_loss},
                      {"best_val_loss", bundle.meta.best_val_loss},
                      {"test_fraction", bundle.meta.test_fraction},
                      {"split_seed", bundle.meta.split_seed},
                      {"data_checksum", bundle.meta.data_checksum}}}};
}

inline ModelBundle checkpoint_from_json(const ordered_json& j) {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw compat_error("checkpoint: unsupported format version");
    ModelBundle bundle;
    std::string kind = j.at("model_kind").get<std::string>();
    const auto& spec = j.at("spec");

    if (kind == "base-dnn") {
        BaseDNNSpec s;
        s.input_dim = spec.at("input_dim").get<std::size_t>();
        s.hidden_dim = spec.at("hidden_dim").get<std::size_t>();
        s.viz_dim = spec.at("viz_dim").get<std::size_t>();
        s.num_classes = spec.at("num_classes").get<std::size_t>();
        bundle.model = std::make_unique<BaseDnnModel>(s, 0);
    } else if (kind == "qidnn") {
        BaseDNNSpec s;
        s.input_dim = spec.at("input_dim").get<std::size_t>();
        s.hidden_dim = spec.at("hidden_dim").get<std::size_t>();
        s.viz_dim = spec.at("viz_dim").get<std::size_t>();
        s.num_classes = spec.at("num_classes").get<std::size_t>();
        auto model = std::make_unique<QidnnModel>(s, detail::qi_from_json(spec.at("qi")), 0);
        model->screened_pairs = detail::pairs_from_json(spec.at("screened_pairs"));
        bundle.model = std::move(model);
    } else if (kind == "mmoe") {
        MMOESpec s;
        s.input_dim = spec.at("input_dim").get<std::size_t>();
        s.expert1_hidden = spec.at("expert1_hidden").get<std::size_t>();
        s.rep_width = spec.at("rep_width").get<std::size_t>();
        s.trunk_hidden = spec.at("trunk_hidden").get<std::size_t>();
        s.trunk_viz = spec.at("trunk_viz").get<std::size_t>();
        s.expert2_qi = detail::qi_from_json(spec.at("qi"));
        auto model = std::make_unique<MmoeModel>(s, 0);
        model->screened_pairs = detail::pairs_from_json(spec.at("screened_pairs"));
        bundle.model = std::move(model);
    } else {
        throw compat_error("checkpoint: unknown model kind '" + kind + "'");
    }

    bundle.feature_indices = j.at("feature_indices").get<std::vector<std::size_t>>();
    bundle.schema_fingerprint =
        std::stoull(j.at("schema_fingerprint").get<std::string>(), nullptr, 16);

    for (const auto& s : j.at("normalization_stats")) {
        FeatureStats st;
        st.mean = s.at("mean").get<double>();
        st.stddev = s.at("stddev").get<double>();
        st.mode = s.at("mode").get<double>();
        st.count = s.at("count").get<std::size_t>();
        bundle.stats.push_back(st);
    }

    const auto& params = j.at("parameters");
    for (Param* p : bundle.model->params()) {
        if (!params.contains(p->id))
            throw compat_error("checkpoint: missing parameter '" + p->id + "'");
        const auto& pj = params.at(p->id);
        auto shape = pj.at("shape").get<std::vector<std::size_t>>();
        auto data = pj.at("data").get<std::vector<double>>();
        if (shape != p->value.shape || data.size() != p->value.data.size())
            throw compat_error("checkpoint: parameter '" + p->id +
                               "' does not match the spec-implied shape");
        p->value.data = std::move(data);
    }

    const auto& t = j.at("training");
    bundle.meta.seed = t.at("seed").get<std::uint64_t>();
    bundle.meta.epochs_run = t.at("epochs_run").get<std::size_t>();
    bundle.meta.best_epoch = t.at("best_epoch").get<std::size_t>();
    bundle.meta.final_train_loss = t.at("final_train_loss").get<double>();
    bundle.meta.best_val_loss = t.at("best_val_loss").get<double>();
    bundle.meta.test_fraction = t.at("test_fraction").get<double>();
    bundle.meta.split_seed = t.at("split_seed").get<std::uint64_t>();
    bundle.meta.data_checksum = t.at("data_checksum").get<std::string>();
    return bundle;
}

inline ModelBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("checkpoint: cannot open '" + path + "'");
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw compat_error("checkpoint: parse failure in '" + path + "': " + e.what());
    }
    try {
        return checkpoint_from_json(j);
    } catch (const ordered_json::exception& e) {
        throw compat_error("checkpoint: malformed '" + path + "': " + e.what());
    }
}

} // namespace riskgrid

#endif

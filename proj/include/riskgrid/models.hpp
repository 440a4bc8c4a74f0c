#ifndef RISKGRID_MODELS_HPP
#define RISKGRID_MODELS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "riskgrid/autodiff.hpp"
#include "riskgrid/errors.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/schema.hpp"
#include "riskgrid/tensor.hpp"

namespace riskgrid {

// ---------------------------------------------------------------------------
// Architecture descriptors
// ---------------------------------------------------------------------------

struct BaseDNNSpec {
    std::size_t input_dim = 34;
    std::size_t hidden_dim = 17;
    std::size_t viz_dim = 8; // two coordinates per class
    std::size_t num_classes = 4;

    void validate() const {
        if (hidden_dim < 1) throw config_error("base dnn: hidden_dim must be >= 1");
        if (viz_dim % 2 != 0) throw config_error("base dnn: viz_dim must be even");
        if (num_classes != viz_dim / 2)
            throw config_error("base dnn: num_classes must equal viz_dim/2");
        if (input_dim < 1) throw config_error("base dnn: input_dim must be >= 1");
    }

    std::size_t param_count() const {
        return input_dim * hidden_dim + hidden_dim + hidden_dim * viz_dim + viz_dim +
               viz_dim * num_classes + num_classes;
    }
};

enum class QIMode { summed, per_pair };

// Quadratic-interaction component: latent vectors for a selected feature
// subset, combined as inner products over all feature pairs.
struct QISpec {
    std::vector<std::size_t> selected; // indices into the model input vector
    std::size_t latent_len = 4;
    QIMode mode = QIMode::summed;

    void validate(std::size_t input_dim) const {
        if (selected.size() < 2) throw config_error("qi: need at least 2 selected features");
        if (selected.size() > input_dim)
            throw config_error("qi: more selected features than inputs");
        if (latent_len < 1) throw config_error("qi: latent length must be >= 1");
        for (std::size_t i = 0; i < selected.size(); ++i) {
            if (selected[i] >= input_dim)
                throw config_error("qi: selected index " + std::to_string(selected[i]) +
                                   " out of range");
            for (std::size_t j = i + 1; j < selected.size(); ++j)
                if (selected[i] == selected[j])
                    throw config_error("qi: duplicate selected index " +
                                       std::to_string(selected[i]));
        }
    }

    std::size_t n() const { return selected.size(); }
    std::size_t width() const {
        return mode == QIMode::summed ? 1 : selected.size() * (selected.size() - 1) / 2;
    }
};

// The seven clinically screened interaction inputs.
inline std::vector<std::size_t> default_qi_selected(const FeatureSchema& schema) {
    return {schema.index_of("LSBP"), schema.index_of("Exs"),  schema.index_of("Sm"),
            schema.index_of("LDBP"), schema.index_of("RSBP"), schema.index_of("HbA1c"),
            schema.index_of("HS")};
}

struct MMOESpec {
    std::size_t input_dim = 20;
    std::size_t expert1_hidden = 11;
    std::size_t rep_width = 11; // both experts project here
    std::size_t trunk_hidden = 17;
    std::size_t trunk_viz = 8;
    QISpec expert2_qi;

    void validate() const {
        if (expert1_hidden != rep_width)
            throw config_error("mmoe: expert representation widths differ (" +
                               std::to_string(expert1_hidden) + " vs " +
                               std::to_string(rep_width) + "); the gated sum needs equal dims");
        expert2_qi.validate(input_dim);
    }
};

// ---------------------------------------------------------------------------
// Standalone quadratic-interaction forward (the O(nk) identity form)
// ---------------------------------------------------------------------------

// All ordered pairs (i<j) of a selected set, lexicographic.
inline std::vector<std::pair<std::size_t, std::size_t>> upper_pairs(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> p;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) p.emplace_back(i, j);
    return p;
}

// sum_{i<j} <V_i,V_j> x_i x_j computed as
// 1/2 sum_l [ (sum_i v_il x_i)^2 - sum_i v_il^2 x_i^2 ].
inline double qi_forward_summed(const Tensor& latents, const std::vector<double>& xsel) {
    std::size_t n = latents.rows(), k = latents.cols();
    if (n < 2) throw config_error("qi_forward: need at least 2 latent vectors");
    if (xsel.size() != n)
        throw shape_error("qi_forward: latents " + latents.shape_str() + " do not match " +
                          std::to_string(xsel.size()) + " inputs");
    double acc = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
        double lin = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double t = latents.at(i, l) * xsel[i];
            lin += t;
            sq += t * t;
        }
        acc += lin * lin - sq;
    }
    return 0.5 * acc;
}

// One inner-product unit per pair: <V_i,V_j> x_i x_j, pairs in upper_pairs
// order.
inline std::vector<double> qi_forward_per_pair(const Tensor& latents,
                                               const std::vector<double>& xsel) {
    std::size_t n = latents.rows(), k = latents.cols();
    if (n < 2) throw config_error("qi_forward: need at least 2 latent vectors");
    if (xsel.size() != n)
        throw shape_error("qi_forward: latents " + latents.shape_str() + " do not match " +
                          std::to_string(xsel.size()) + " inputs");
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t l = 0; l < k; ++l) dot += latents.at(i, l) * latents.at(j, l);
            out.push_back(dot * xsel[i] * xsel[j]);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Parameter initialization
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed,
                             const std::string& name) {
    auto rng = make_rng(seed, "init:" + name);
    double bound = std::sqrt(6.0 / double(rows + cols));
    Tensor t = Tensor::zeros(rows, cols);
    for (double& v : t.data) v = uniform_in(rng, -bound, bound);
    return t;
}

// Input-slice helpers for tape forwards: X columns picked / squared / paired.
inline Tensor select_columns(const Tensor& X, const std::vector<std::size_t>& cols) {
    Tensor Y = Tensor::zeros(X.rows(), cols.size());
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) Y.at(i, j) = X.at(i, cols[j]);
    return Y;
}

inline Tensor squared(Tensor t) {
    for (double& v : t.data) v *= v;
    return t;
}

inline Tensor pair_products(const Tensor& Xsel,
                            const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    Tensor Y = Tensor::zeros(Xsel.rows(), pairs.size());
    for (std::size_t i = 0; i < Xsel.rows(); ++i)
        for (std::size_t t = 0; t < pairs.size(); ++t)
            Y.at(i, t) = Xsel.at(i, pairs[t].first) * Xsel.at(i, pairs[t].second);
    return Y;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

enum class ModelKind { base_dnn, qidnn, mmoe };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
    case ModelKind::base_dnn: return "base-dnn";
    case ModelKind::qidnn: return "qidnn";
    case ModelKind::mmoe: return "mmoe";
    }
    return "?";
}

// References into a tape after one forward build.
struct ForwardRefs {
    Tape::Ref risk_logits;                // [B x 4]
    std::optional<Tape::Ref> stroke_logit; // [B x 1]
    std::optional<Tape::Ref> viz;          // [B x viz_dim]
    std::optional<Tape::Ref> gate1;        // [B x 2]
    std::optional<Tape::Ref> gate2;        // [B x 2]
};

class Model {
public:
    virtual ~Model() = default;
    virtual ModelKind kind() const = 0;
    virtual std::size_t input_dim() const = 0;
    virtual std::vector<Param*> params() = 0;
    virtual ForwardRefs forward(Tape& tape, const Tensor& X) const = 0;

    std::size_t param_count() {
        std::size_t n = 0;
        for (Param* p : params()) n += p->value.numel();
        return n;
    }

    // Risk-head probabilities for a batch; pure given the parameters.
    Tensor predict_risk_probs(const Tensor& X) const {
        Tape t;
        auto out = forward(t, X);
        return t.value(t.softmax_rows(out.risk_logits));
    }

    Tensor predict_risk_logits(const Tensor& X) const {
        Tape t;
        return t.value(forward(t, X).risk_logits);
    }

    std::vector<double> predict_stroke_prob(const Tensor& X) const {
        Tape t;
        auto out = forward(t, X);
        if (!out.stroke_logit) throw compat_error("model has no stroke head");
        const Tensor& z = t.value(*out.stroke_logit);
        std::vector<double> p(z.rows());
        for (std::size_t i = 0; i < z.rows(); ++i) p[i] = sigmoid(z.at(i, 0));
        return p;
    }
};

// Four-state multilayer perceptron with a 2x4 projection layer ahead of the
// output, kept around for class-overlap visualization.
class BaseDnnModel final : public Model {
public:
    BaseDNNSpec spec;
    Param w1, b1, w2, b2, w3, b3;

    BaseDnnModel(BaseDNNSpec s, std::uint64_t seed) : spec(s) {
        spec.validate();
        w1 = Param("w1", detail::glorot_uniform(spec.input_dim, spec.hidden_dim, seed, "w1"));
        b1 = Param("b1", Tensor::zeros(1, spec.hidden_dim));
        w2 = Param("w2", detail::glorot_uniform(spec.hidden_dim, spec.viz_dim, seed, "w2"));
        b2 = Param("b2", Tensor::zeros(1, spec.viz_dim));
        // zero output layer: every class starts at the uniform distribution
        w3 = Param("w3", Tensor::zeros(spec.viz_dim, spec.num_classes));
        b3 = Param("b3", Tensor::zeros(1, spec.num_classes));
    }

    ModelKind kind() const override { return ModelKind::base_dnn; }
    std::size_t input_dim() const override { return spec.input_dim; }
    std::vector<Param*> params() override { return {&w1, &b1, &w2, &b2, &w3, &b3}; }

    ForwardRefs forward(Tape& t, const Tensor& X) const override {
        if (X.cols() != spec.input_dim)
            throw shape_error("base dnn: input " + X.shape_str() + " does not match input_dim " +
                              std::to_string(spec.input_dim));
        auto P = [&t](const Param& p) { return t.param(const_cast<Param&>(p)); };
        auto x = t.input(X);
        auto h = t.relu(t.add_bias(t.matmul(x, P(w1)), P(b1)));
        auto viz = t.relu(t.add_bias(t.matmul(h, P(w2)), P(b2)));
        auto logits = t.add_bias(t.matmul(viz, P(w3)), P(b3));
        ForwardRefs out;
        out.risk_logits = logits;
        out.viz = viz;
        return out;
    }
};

// Deep trunk plus quadratic-interaction component; their concatenation feeds
// a learned final linear layer before the softmax.
class QidnnModel final : public Model {
public:
    BaseDNNSpec trunk;
    QISpec qi;
    std::vector<std::pair<std::size_t, std::size_t>> screened_pairs; // metadata
    Param w1, b1, w2, b2, w3, b3, V, wf, bf;

    QidnnModel(BaseDNNSpec trunk_spec, QISpec qi_spec, std::uint64_t seed)
        : trunk(trunk_spec), qi(std::move(qi_spec)) {
        trunk.validate();
        qi.validate(trunk.input_dim);
        w1 = Param("w1", detail::glorot_uniform(trunk.input_dim, trunk.hidden_dim, seed, "w1"));
        b1 = Param("b1", Tensor::zeros(1, trunk.hidden_dim));
        w2 = Param("w2", detail::glorot_uniform(trunk.hidden_dim, trunk.viz_dim, seed, "w2"));
        b2 = Param("b2", Tensor::zeros(1, trunk.viz_dim));
        w3 = Param("w3", detail::glorot_uniform(trunk.viz_dim, trunk.num_classes, seed, "w3"));
        b3 = Param("b3", Tensor::zeros(1, trunk.num_classes));
        V = Param("V", detail::glorot_uniform(qi.n(), qi.latent_len, seed, "V"));
        wf = Param("wf", Tensor::zeros(trunk.num_classes + qi.width(), trunk.num_classes));
        bf = Param("bf", Tensor::zeros(1, trunk.num_classes));
    }

    ModelKind kind() const override { return ModelKind::qidnn; }
    std::size_t input_dim() const override { return trunk.input_dim; }
    std::vector<Param*> params() override {
        return {&w1, &b1, &w2, &b2, &w3, &b3, &V, &wf, &bf};
    }

    // y_QI for one batch as tape nodes: summed mode uses the identity form,
    // per-pair mode one inner-product unit per feature pair.
    Tape::Ref qi_component(Tape& t, const Tensor& X) const {
        Tensor Xsel = detail::select_columns(X, qi.selected);
        Tape::Ref v = t.param(const_cast<Param&>(V));
        if (qi.mode == QIMode::summed) {
            auto s = t.matmul(t.input(Xsel), v);                     // [B x k]
            auto q = t.matmul(t.input(detail::squared(Xsel)), t.square(v));
            return t.scale(t.sub(t.row_sum(t.square(s)), t.row_sum(q)), 0.5);
        }
        auto pairs = upper_pairs(qi.n());
        auto gram = t.matmul_nt(v, v);                               // [n x n]
        auto dots = t.gather_pairs(gram, pairs);                     // [1 x P]
        return t.row_times_const(dots, detail::pair_products(Xsel, pairs));
    }

    ForwardRefs forward(Tape& t, const Tensor& X) const override {
        if (X.cols() != trunk.input_dim)
            throw shape_error("qidnn: input " + X.shape_str() + " does not match input_dim " +
                              std::to_string(trunk.input_dim));
        auto P = [&t](const Param& p) { return t.param(const_cast<Param&>(p)); };
        auto x = t.input(X);
        auto h = t.relu(t.add_bias(t.matmul(x, P(w1)), P(b1)));
        auto g = t.relu(t.add_bias(t.matmul(h, P(w2)), P(b2)));
        auto deep = t.add_bias(t.matmul(g, P(w3)), P(b3));
        auto yqi = qi_component(t, X);
        auto cat = t.concat_cols({deep, yqi});
        auto logits = t.add_bias(t.matmul(cat, P(wf)), P(bf));
        ForwardRefs out;
        out.risk_logits = logits;
        return out;
    }
};

// Two experts, two softmax gates, no towers: each head's gated mixture goes
// straight to its output layer.
class MmoeModel final : public Model {
public:
    MMOESpec spec;
    std::vector<std::pair<std::size_t, std::size_t>> screened_pairs; // metadata
    Param e1_w, e1_b;
    Param e2_w1, e2_b1, e2_w2, e2_b2, e2_w3, e2_b3, e2_V, e2_wc, e2_bc;
    Param g1_w, g1_b, g2_w, g2_b;
    Param h1_w, h1_b, h2_w, h2_b;

    MmoeModel(MMOESpec s, std::uint64_t seed) : spec(std::move(s)) {
        spec.validate();
        const std::size_t d = spec.input_dim;
        e1_w = Param("e1_w", detail::glorot_uniform(d, spec.expert1_hidden, seed, "e1_w"));
        e1_b = Param("e1_b", Tensor::zeros(1, spec.expert1_hidden));
        e2_w1 = Param("e2_w1", detail::glorot_uniform(d, spec.trunk_hidden, seed, "e2_w1"));
        e2_b1 = Param("e2_b1", Tensor::zeros(1, spec.trunk_hidden));
        e2_w2 = Param("e2_w2",
                      detail::glorot_uniform(spec.trunk_hidden, spec.trunk_viz, seed, "e2_w2"));
        e2_b2 = Param("e2_b2", Tensor::zeros(1, spec.trunk_viz));
        e2_w3 = Param("e2_w3", detail::glorot_uniform(spec.trunk_viz, 4, seed, "e2_w3"));
        e2_b3 = Param("e2_b3", Tensor::zeros(1, 4));
        e2_V = Param("e2_V", detail::glorot_uniform(spec.expert2_qi.n(),
                                                    spec.expert2_qi.latent_len, seed, "e2_V"));
        e2_wc = Param("e2_wc", detail::glorot_uniform(4 + spec.expert2_qi.width(),
                                                      spec.rep_width, seed, "e2_wc"));
        e2_bc = Param("e2_bc", Tensor::zeros(1, spec.rep_width));
        g1_w = Param("g1_w", detail::glorot_uniform(d, 2, seed, "g1_w"));
        g1_b = Param("g1_b", Tensor::zeros(1, 2));
        g2_w = Param("g2_w", detail::glorot_uniform(d, 2, seed, "g2_w"));
        g2_b = Param("g2_b", Tensor::zeros(1, 2));
        // zero output layers: both heads start uniform
        h1_w = Param("h1_w", Tensor::zeros(spec.rep_width, 1));
        h1_b = Param("h1_b", Tensor::zeros(1, 1));
        h2_w = Param("h2_w", Tensor::zeros(spec.rep_width, 4));
        h2_b = Param("h2_b", Tensor::zeros(1, 4));
    }

    ModelKind kind() const override { return ModelKind::mmoe; }
    std::size_t input_dim() const override { return spec.input_dim; }
    std::vector<Param*> params() override {
        return {&e1_w, &e1_b, &e2_w1, &e2_b1, &e2_w2, &e2_b2, &e2_w3, &e2_b3, &e2_V, &e2_wc,
                &e2_bc, &g1_w, &g1_b, &g2_w, &g2_b, &h1_w, &h1_b, &h2_w, &h2_b};
    }

    ForwardRefs forward(Tape& t, const Tensor& X) const override {
        if (X.cols() != spec.input_dim)
            throw shape_error("mmoe: input " + X.shape_str() + " does not match input_dim " +
                              std::to_string(spec.input_dim));
        auto x = t.input(X);
        auto P = [&t](const Param& p) { return t.param(const_cast<Param&>(p)); };

        // Expert1: one hidden layer
        auto f1 = t.relu(t.add_bias(t.matmul(x, P(e1_w)), P(e1_b)));

        // Expert2: quadratic-interaction trunk projected to the shared width
        auto h = t.relu(t.add_bias(t.matmul(x, P(e2_w1)), P(e2_b1)));
        auto g = t.relu(t.add_bias(t.matmul(h, P(e2_w2)), P(e2_b2)));
        auto deep = t.add_bias(t.matmul(g, P(e2_w3)), P(e2_b3));
        Tensor Xsel = detail::select_columns(X, spec.expert2_qi.selected);
        auto v = P(e2_V);
        Tape::Ref yqi;
        if (spec.expert2_qi.mode == QIMode::summed) {
            auto sum = t.matmul(t.input(Xsel), v);
            auto q = t.matmul(t.input(detail::squared(Xsel)), t.square(v));
            yqi = t.scale(t.sub(t.row_sum(t.square(sum)), t.row_sum(q)), 0.5);
        } else {
            auto pairs = upper_pairs(spec.expert2_qi.n());
            yqi = t.row_times_const(t.gather_pairs(t.matmul_nt(v, v), pairs),
                                    detail::pair_products(Xsel, pairs));
        }
        auto f2 = t.relu(t.add_bias(t.matmul(t.concat_cols({deep, yqi}), P(e2_wc)), P(e2_bc)));

        // Per-objective gates over the two experts
        auto gate1 = t.softmax_rows(t.add_bias(t.matmul(x, P(g1_w)), P(g1_b)));
        auto gate2 = t.softmax_rows(t.add_bias(t.matmul(x, P(g2_w)), P(g2_b)));

        auto mix = [&](Tape::Ref gate) {
            auto a = t.colwise_mul(t.slice_cols(gate, 0, 1), f1);
            auto b = t.colwise_mul(t.slice_cols(gate, 1, 1), f2);
            return t.add(a, b);
        };
        auto stroke = t.add_bias(t.matmul(mix(gate1), P(h1_w)), P(h1_b));
        auto risk = t.add_bias(t.matmul(mix(gate2), P(h2_w)), P(h2_b));

        ForwardRefs out;
        out.risk_logits = risk;
        out.stroke_logit = stroke;
        out.gate1 = gate1;
        out.gate2 = gate2;
        return out;
    }
};

} // namespace riskgrid

#endif

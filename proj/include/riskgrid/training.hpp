#ifndef RISKGRID_TRAINING_HPP
#define RISKGRID_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "riskgrid/autodiff.hpp"
#include "riskgrid/dataset.hpp"
#include "riskgrid/errors.hpp"
#include "riskgrid/metrics.hpp"
#include "riskgrid/models.hpp"
#include "riskgrid/rng.hpp"

namespace riskgrid {

// ---------------------------------------------------------------------------
// Losses (logit-space for numerical stability)
// ---------------------------------------------------------------------------

// -ln softmax(logits)[label], via log-sum-exp.
inline double cross_entropy(const std::vector<double>& logits, int label) {
    if (logits.empty() || label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw data_error("cross_entropy: label out of range");
    return log_sum_exp(logits.data(), logits.size()) - logits[static_cast<std::size_t>(label)];
}

// Convenience form on an existing distribution.
inline double cross_entropy_probs(const std::vector<double>& probs, int label) {
    return -std::log(probs.at(static_cast<std::size_t>(label)));
}

// -[y ln p + (1-y) ln(1-p)] computed from the pre-sigmoid logit.
inline double binary_cross_entropy_logit(double logit, double y) {
    return softplus(logit) - y * logit;
}

inline double binary_cross_entropy(double p, double y) {
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

// Per-sample two-objective loss; the labels must agree (stroke iff attack).
inline double mmoe_loss(double stroke_logit, const std::vector<double>& risk_logits,
                        int stroke_label, int risk_label) {
    if ((stroke_label == 1) != (risk_label == kAttack))
        throw data_error("mmoe_loss: stroke label inconsistent with risk state");
    return binary_cross_entropy_logit(stroke_logit, stroke_label) +
           cross_entropy(risk_logits, risk_label);
}

// ---------------------------------------------------------------------------
// Configuration and trace
// ---------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t max_epochs = 200;
    std::size_t batch_size = 64;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    double stroke_weight = 1.0; // objective weights, unweighted sum by default
    double risk_weight = 1.0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw config_error("train: learning_rate must be positive");
        if (max_epochs < 1) throw config_error("train: max_epochs must be positive");
        if (batch_size < 1) throw config_error("train: batch_size must be positive");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw config_error("train: validation_fraction must be in (0,1)");
        if (!(stroke_weight > 0.0 && risk_weight > 0.0))
            throw config_error("train: objective weights must be positive");
    }
};

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double stroke_loss = std::numeric_limits<double>::quiet_NaN(); // two-objective only
    double risk_loss = std::numeric_limits<double>::quiet_NaN();
    double val_auc = std::numeric_limits<double>::quiet_NaN(); // binary head only
};

struct TrainTrace {
    std::vector<EpochRecord> records;
    std::size_t stopped_at_epoch = 0; // last epoch that ran
    std::size_t best_epoch = 0;       // epoch whose parameters are returned
};

inline std::string trace_csv(const TrainTrace& trace) {
    std::ostringstream os;
    os << "epoch,train_loss,val_loss,stroke_loss,risk_loss,val_auc\n";
    auto cell = [&os](double v) {
        os << ',';
        if (!std::isnan(v)) os << detail::format_double(v);
    };
    for (const auto& r : trace.records) {
        os << r.epoch;
        cell(r.train_loss);
        cell(r.val_loss);
        cell(r.stroke_loss);
        cell(r.risk_loss);
        cell(r.val_auc);
        os << '\n';
    }
    return os.str();
}

// Called once per mini-batch with the on-tape loss values; lets callers
// audit the objective bookkeeping without re-deriving it.
struct BatchLossReport {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    double total = 0.0;
    double stroke = std::numeric_limits<double>::quiet_NaN();
    double risk = std::numeric_limits<double>::quiet_NaN();
};
using BatchObserver = std::function<void(const BatchLossReport&)>;

// ---------------------------------------------------------------------------
// Adam optimizer
// ---------------------------------------------------------------------------

class Adam {
public:
    Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (Param* p : params_)
            states_.push_back({Tensor::zeros_like(p->value), Tensor::zeros_like(p->value)});
    }

    void step() {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, double(t_));
        double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Param* p = params_[i];
            Tensor& m = states_[i].m;
            Tensor& v = states_[i].v;
            for (std::size_t k = 0; k < p->value.data.size(); ++k) {
                double g = p->grad.data[k];
                m.data[k] = beta1_ * m.data[k] + (1.0 - beta1_) * g;
                v.data[k] = beta2_ * v.data[k] + (1.0 - beta2_) * g * g;
                double mhat = m.data[k] / bc1;
                double vhat = v.data[k] / bc2;
                p->value.data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    struct State {
        Tensor m, v;
    };
    std::vector<Param*> params_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<State> states_;
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace detail {

// Stratified fit/validation partition over integer labels; classes too small
// to split stay in the fit set.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> fit_val_split(
    const std::vector<int>& labels, double val_fraction, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 4> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::vector<std::size_t> fit, val;
    for (int c = 0; c < 4; ++c) {
        auto rows = by_class[c];
        if (rows.empty()) continue;
        auto rng = make_rng(seed, "valsplit", static_cast<std::uint64_t>(c));
        shuffle_vec(rows, rng);
        std::size_t n_val =
            rows.size() < 2
                ? 0
                : std::min(rows.size() - 1, static_cast<std::size_t>(std::llround(
                                                double(rows.size()) * val_fraction)));
        for (std::size_t i = 0; i < rows.size(); ++i)
            (i < n_val ? val : fit).push_back(rows[i]);
    }
    if (val.empty() && fit.size() >= 2) {
        val.push_back(fit.back());
        fit.pop_back();
    }
    std::sort(fit.begin(), fit.end());
    std::sort(val.begin(), val.end());
    return {fit, val};
}

inline Tensor gather_rows(const Tensor& X, const std::vector<std::size_t>& rows) {
    Tensor Y = Tensor::zeros(rows.size(), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) Y.at(i, j) = X.at(rows[i], j);
    return Y;
}

} // namespace detail

struct LossParts {
    double total = 0.0;
    double stroke = std::numeric_limits<double>::quiet_NaN();
    double risk = std::numeric_limits<double>::quiet_NaN();
};

// One forward pass plus loss on a tape. The two-objective total is built as
// the sum of the two separately accumulated means, so it equals their
// independent recomputation exactly.
inline Tape::Ref build_loss(Model& model, Tape& t, const Tensor& X,
                            const std::vector<int>& risk, const std::vector<double>& stroke,
                            const TrainConfig& cfg, LossParts* parts = nullptr) {
    auto out = model.forward(t, X);
    auto risk_loss = t.softmax_xent_mean(out.risk_logits, risk);
    if (!out.stroke_logit) {
        if (parts) {
            parts->total = t.value(risk_loss).scalar_value();
            parts->risk = parts->total;
        }
        return risk_loss;
    }
    auto stroke_loss = t.bce_logits_mean(*out.stroke_logit, stroke);
    Tape::Ref total;
    if (cfg.stroke_weight == 1.0 && cfg.risk_weight == 1.0)
        total = t.add(stroke_loss, risk_loss);
    else
        total = t.add(t.scale(stroke_loss, cfg.stroke_weight),
                      t.scale(risk_loss, cfg.risk_weight));
    if (parts) {
        parts->total = t.value(total).scalar_value();
        parts->stroke = t.value(stroke_loss).scalar_value();
        parts->risk = t.value(risk_loss).scalar_value();
    }
    return total;
}

// Mini-batch Adam with early stopping on validation loss. Returns the trace;
// the model ends up with the parameters of the best validation epoch.
inline TrainTrace train_model(Model& model, const Tensor& X, const std::vector<int>& risk_labels,
                              const TrainConfig& cfg, const BatchObserver& observer = {}) {
    cfg.validate();
    if (X.rows() != risk_labels.size())
        throw data_error("train: row/label count mismatch");
    if (X.rows() < 4) throw data_error("train: not enough samples");

    const bool two_objective = [&] {
        Tape probe;
        return model.forward(probe, detail::gather_rows(X, {0})).stroke_logit.has_value();
    }();

    std::vector<double> stroke_labels(risk_labels.size());
    for (std::size_t i = 0; i < risk_labels.size(); ++i)
        stroke_labels[i] = risk_labels[i] == kAttack ? 1.0 : 0.0;

    auto [fit_rows, val_rows] =
        detail::fit_val_split(risk_labels, cfg.validation_fraction, cfg.seed);
    if (fit_rows.empty() || val_rows.empty())
        throw data_error("train: fit/validation split left an empty side");

    Tensor X_val = detail::gather_rows(X, val_rows);
    std::vector<int> risk_val;
    std::vector<double> stroke_val;
    for (std::size_t r : val_rows) {
        risk_val.push_back(risk_labels[r]);
        stroke_val.push_back(stroke_labels[r]);
    }

    auto params = model.params();
    Adam opt(params, cfg.learning_rate);

    TrainTrace trace;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<Tensor> best_values;
    auto snapshot = [&] {
        best_values.clear();
        for (Param* p : params) best_values.push_back(p->value);
    };
    snapshot();
    trace.best_epoch = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto order = fit_rows;
        auto rng = make_rng(cfg.seed, "shuffle", epoch);
        shuffle_vec(order, rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0, batch_no = 0; start < order.size();
             start += cfg.batch_size, ++batch_no) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::size_t> rows(order.begin() + long(start), order.begin() + long(end));
            Tensor Xb = detail::gather_rows(X, rows);
            std::vector<int> rb;
            std::vector<double> sb;
            for (std::size_t r : rows) {
                rb.push_back(risk_labels[r]);
                sb.push_back(stroke_labels[r]);
            }
            Tape tape;
            LossParts parts;
            auto loss = build_loss(model, tape, Xb, rb, sb, cfg, &parts);
            if (!std::isfinite(parts.total))
                throw train_error("train: loss diverged at epoch " + std::to_string(epoch));
            if (observer)
                observer(BatchLossReport{epoch, batch_no, parts.total, parts.stroke, parts.risk});
            for (Param* p : params) p->zero_grad();
            tape.backward(loss);
            opt.step();
            loss_sum += parts.total * double(rows.size());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / double(fit_rows.size());
        {
            Tape tape;
            LossParts parts;
            build_loss(model, tape, X_val, risk_val, stroke_val, cfg, &parts);
            rec.val_loss = parts.total;
            if (two_objective) {
                rec.stroke_loss = parts.stroke;
                rec.risk_loss = parts.risk;
                bool has_pos = false, has_neg = false;
                for (double y : stroke_val) (y == 1.0 ? has_pos : has_neg) = true;
                if (has_pos && has_neg) {
                    std::vector<int> ybin(stroke_val.begin(), stroke_val.end());
                    rec.val_auc = auc(model.predict_stroke_prob(X_val), ybin);
                }
            }
        }
        if (!std::isfinite(rec.val_loss))
            throw train_error("train: validation loss diverged at epoch " +
                              std::to_string(epoch));
        trace.records.push_back(rec);
        trace.stopped_at_epoch = epoch;

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            trace.best_epoch = epoch;
            since_best = 0;
            snapshot();
        } else {
            since_best++;
            if (since_best > cfg.patience) break;
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
    return trace;
}

} // namespace riskgrid

#endif

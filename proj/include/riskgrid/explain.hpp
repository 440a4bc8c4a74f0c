#ifndef RISKGRID_EXPLAIN_HPP
#define RISKGRID_EXPLAIN_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "riskgrid/errors.hpp"
#include "riskgrid/metrics.hpp"
#include "riskgrid/models.hpp"
#include "riskgrid/parallel.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/tensor.hpp"

namespace riskgrid {

// ---------------------------------------------------------------------------
// Value functions
// ---------------------------------------------------------------------------

// Multi-target batched evaluation: [B x d] hybrid samples -> [B x T] scores.
using BatchEval = std::function<Tensor(const Tensor&)>;

// Single-target value function over feature coalitions: v(S) evaluates the
// model on the hybrid vector taking coalition features from the sample and
// the rest from the baseline.
struct ValueFunction {
    std::function<std::vector<double>(const Tensor&)> eval; // [B x d] -> B values
    std::vector<double> baseline;
};

// Attribution target for classes is the pre-softmax logit; probabilities
// saturate and break additive reading.
inline BatchEval risk_logits_eval(const Model& model) {
    return [&model](const Tensor& X) { return model.predict_risk_logits(X); };
}

inline BatchEval stroke_logit_eval(const Model& model) {
    return [&model](const Tensor& X) {
        Tape t;
        auto out = model.forward(t, X);
        if (!out.stroke_logit) throw compat_error("explain: model has no stroke head");
        Tensor z = t.value(*out.stroke_logit);
        return z;
    };
}

inline ValueFunction class_logit_value_fn(const Model& model, int class_idx,
                                          std::vector<double> baseline) {
    if (class_idx < 0 || class_idx >= kNumStates)
        throw config_error("explain: class index out of range");
    ValueFunction vf;
    vf.baseline = std::move(baseline);
    vf.eval = [&model, class_idx](const Tensor& X) {
        Tensor logits = model.predict_risk_logits(X);
        std::vector<double> out(logits.rows());
        for (std::size_t i = 0; i < logits.rows(); ++i)
            out[i] = logits.at(i, static_cast<std::size_t>(class_idx));
        return out;
    };
    return vf;
}

// ---------------------------------------------------------------------------
// Explanations
// ---------------------------------------------------------------------------

struct Explanation {
    std::size_t sample_id = 0;
    std::string target;
    double base_value = 0.0;
    double prediction = 0.0;
    std::vector<double> phi;

    double additivity_gap() const {
        double s = 0.0;
        for (double p : phi) s += p;
        return prediction - base_value - s;
    }
};

struct ExplainOptions {
    std::size_t n_permutations = 128; // antithetic pairs
    std::size_t exact_limit = 12;     // widest input enumerated exhaustively
    std::uint64_t seed = 0;
    std::size_t max_samples = 64;     // dataset subsample for aggregate work
    std::size_t screen_draws = 8;     // subset draws per pair and sample
};

namespace detail {

inline Tensor eval_chunked(const BatchEval& eval, const Tensor& rows,
                           std::size_t chunk = 8192) {
    if (rows.rows() <= chunk) return eval(rows);
    Tensor out;
    std::size_t done = 0;
    while (done < rows.rows()) {
        std::size_t take = std::min(chunk, rows.rows() - done);
        Tensor part = Tensor::zeros(take, rows.cols());
        for (std::size_t i = 0; i < take; ++i)
            for (std::size_t j = 0; j < rows.cols(); ++j)
                part.at(i, j) = rows.at(done + i, j);
        Tensor r = eval(part);
        if (out.numel() == 0) out = Tensor::zeros(rows.rows(), r.cols());
        for (std::size_t i = 0; i < take; ++i)
            for (std::size_t t = 0; t < r.cols(); ++t) out.at(done + i, t) = r.at(i, t);
        done += take;
    }
    return out;
}

// All 2^p coalition scores. Row m is the hybrid with feature j taken from
// the sample iff bit j of m is set.
inline Tensor coalition_table(const BatchEval& eval, const std::vector<double>& baseline,
                              const std::vector<double>& x) {
    std::size_t p = x.size();
    std::size_t n = std::size_t(1) << p;
    Tensor rows = Tensor::zeros(n, p);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t j = 0; j < p; ++j)
            rows.at(m, j) = (m >> j) & 1 ? x[j] : baseline[j];
    return eval_chunked(eval, rows);
}

inline std::vector<double> shapley_weights(std::size_t p) {
    // w(s) = s! (p-s-1)! / p!
    std::vector<double> fact(p + 1, 1.0);
    for (std::size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * double(i);
    std::vector<double> w(p);
    for (std::size_t s = 0; s < p; ++s) w[s] = fact[s] * fact[p - s - 1] / fact[p];
    return w;
}

} // namespace detail

// Exact Shapley values for every target column by coalition enumeration.
inline std::vector<Explanation> shapley_exact_multi(const BatchEval& eval,
                                                    const std::vector<double>& baseline,
                                                    const std::vector<double>& x,
                                                    std::size_t exact_limit = 12) {
    std::size_t p = x.size();
    if (p != baseline.size()) throw shape_error("shapley: sample/baseline width mismatch");
    if (p > exact_limit)
        throw config_error("shapley_exact: " + std::to_string(p) +
                           " features exceed the enumeration limit of " +
                           std::to_string(exact_limit) + "; use the sampling estimator");
    Tensor v = detail::coalition_table(eval, baseline, x);
    std::size_t targets = v.cols();
    auto w = detail::shapley_weights(p);

    std::vector<Explanation> out(targets);
    std::size_t full = (std::size_t(1) << p) - 1;
    for (std::size_t t = 0; t < targets; ++t) {
        out[t].base_value = v.at(0, t);
        out[t].prediction = v.at(full, t);
        out[t].phi.assign(p, 0.0);
    }
    for (std::size_t m = 0; m <= full; ++m) {
        auto s = static_cast<std::size_t>(std::popcount(m));
        for (std::size_t j = 0; j < p; ++j) {
            if ((m >> j) & 1) continue;
            double weight = w[s];
            std::size_t with = m | (std::size_t(1) << j);
            for (std::size_t t = 0; t < targets; ++t)
                out[t].phi[j] += weight * (v.at(with, t) - v.at(m, t));
        }
    }
    return out;
}

// Permutation-sampling estimator with antithetic pairs: every sampled order
// is also walked in reverse, and each walk telescopes from the baseline to
// the full sample, so additivity carries over to the average.
inline std::vector<Explanation> shapley_sampled_multi(const BatchEval& eval,
                                                      const std::vector<double>& baseline,
                                                      const std::vector<double>& x,
                                                      std::size_t n_permutations,
                                                      std::uint64_t seed) {
    std::size_t p = x.size();
    if (p != baseline.size()) throw shape_error("shapley: sample/baseline width mismatch");
    if (n_permutations < 2 || n_permutations % 2 != 0)
        throw config_error("shapley_sampled: permutation count must be even and at least 2");

    std::size_t half = n_permutations / 2;
    std::vector<std::vector<std::size_t>> perms;
    perms.reserve(n_permutations);
    auto rng = make_rng(seed, "shapley_perm");
    for (std::size_t k = 0; k < half; ++k) {
        std::vector<std::size_t> perm(p);
        for (std::size_t j = 0; j < p; ++j) perm[j] = j;
        shuffle_vec(perm, rng);
        perms.push_back(perm);
        perms.emplace_back(perm.rbegin(), perm.rend());
    }

    // rows: one shared baseline row, then p-1 interior prefixes per
    // permutation, then one shared full row
    std::size_t interior = p > 1 ? p - 1 : 0;
    Tensor rows = Tensor::zeros(2 + perms.size() * interior, p);
    for (std::size_t j = 0; j < p; ++j) {
        rows.at(0, j) = baseline[j];
        rows.at(1, j) = x[j];
    }
    std::size_t r = 2;
    for (const auto& perm : perms) {
        std::vector<double> cur = baseline;
        for (std::size_t k = 0; k + 1 < p; ++k) {
            cur[perm[k]] = x[perm[k]];
            for (std::size_t j = 0; j < p; ++j) rows.at(r, j) = cur[j];
            ++r;
        }
    }
    Tensor v = detail::eval_chunked(eval, rows);
    std::size_t targets = v.cols();

    std::vector<Explanation> out(targets);
    for (std::size_t t = 0; t < targets; ++t) {
        out[t].base_value = v.at(0, t);
        out[t].prediction = v.at(1, t);
        out[t].phi.assign(p, 0.0);
    }
    for (std::size_t k = 0; k < perms.size(); ++k) {
        const auto& perm = perms[k];
        std::size_t first = 2 + k * interior;
        for (std::size_t t = 0; t < targets; ++t) {
            double prev = v.at(0, t);
            for (std::size_t step = 0; step < p; ++step) {
                double next = step + 1 < p ? v.at(first + step, t) : v.at(1, t);
                out[t].phi[perm[step]] += next - prev;
                prev = next;
            }
        }
    }
    for (std::size_t t = 0; t < targets; ++t)
        for (double& f : out[t].phi) f /= double(perms.size());
    return out;
}

inline Explanation shapley_exact(const ValueFunction& vf, const std::vector<double>& x,
                                 std::size_t exact_limit = 12) {
    BatchEval eval = [&vf](const Tensor& X) {
        auto vals = vf.eval(X);
        Tensor t = Tensor::zeros(vals.size(), 1);
        for (std::size_t i = 0; i < vals.size(); ++i) t.at(i, 0) = vals[i];
        return t;
    };
    return shapley_exact_multi(eval, vf.baseline, x, exact_limit)[0];
}

inline Explanation shapley_sampled(const ValueFunction& vf, const std::vector<double>& x,
                                   std::size_t n_permutations, std::uint64_t seed) {
    BatchEval eval = [&vf](const Tensor& X) {
        auto vals = vf.eval(X);
        Tensor t = Tensor::zeros(vals.size(), 1);
        for (std::size_t i = 0; i < vals.size(); ++i) t.at(i, 0) = vals[i];
        return t;
    };
    return shapley_sampled_multi(eval, vf.baseline, x, n_permutations, seed)[0];
}

// Per-state explanations of one sample against the risk logits.
inline std::vector<Explanation> explain_states(const Model& model,
                                               const std::vector<double>& x,
                                               const std::vector<double>& baseline,
                                               const ExplainOptions& opts = {}) {
    auto eval = risk_logits_eval(model);
    std::vector<Explanation> exps =
        x.size() <= opts.exact_limit
            ? shapley_exact_multi(eval, baseline, x, opts.exact_limit)
            : shapley_sampled_multi(eval, baseline, x, opts.n_permutations, opts.seed);
    for (int c = 0; c < kNumStates; ++c) exps[c].target = kStateNames[c];
    return exps;
}

// ---------------------------------------------------------------------------
// Global importance
// ---------------------------------------------------------------------------

struct ImportanceEntry {
    std::size_t feature = 0;
    double overall = 0.0;                       // sum of the per-state means
    std::array<double, kNumStates> per_state{}; // mean |phi| per state
};

namespace detail {

inline std::vector<std::size_t> subsample_rows(std::size_t n, std::size_t want,
                                               std::uint64_t seed) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    if (n <= want) return rows;
    auto rng = make_rng(seed, "subsample");
    shuffle_vec(rows, rng);
    rows.resize(want);
    std::sort(rows.begin(), rows.end());
    return rows;
}

} // namespace detail

// Mean absolute Shapley value of every feature, per state and overall,
// over a (seeded) subsample of rows. Sorted by descending overall weight.
inline std::vector<ImportanceEntry> importance(const Model& model, const Tensor& X,
                                               const std::vector<double>& baseline,
                                               const ExplainOptions& opts = {}) {
    std::size_t p = X.cols();
    auto rows = detail::subsample_rows(X.rows(), opts.max_samples, opts.seed);
    std::vector<std::vector<std::array<double, kNumStates>>> acc(
        rows.size(), std::vector<std::array<double, kNumStates>>(p));

    auto eval = risk_logits_eval(model);
    parallel_for(rows.size(), [&](std::size_t k) {
        std::vector<double> x(p);
        for (std::size_t j = 0; j < p; ++j) x[j] = X.at(rows[k], j);
        std::vector<Explanation> exps =
            p <= opts.exact_limit
                ? shapley_exact_multi(eval, baseline, x, opts.exact_limit)
                : shapley_sampled_multi(eval, baseline, x, opts.n_permutations,
                                        substream_seed(opts.seed, "importance", rows[k]));
        for (std::size_t j = 0; j < p; ++j)
            for (int c = 0; c < kNumStates; ++c)
                acc[k][j][c] = std::fabs(exps[c].phi[j]);
    });

    std::vector<ImportanceEntry> out(p);
    for (std::size_t j = 0; j < p; ++j) {
        out[j].feature = j;
        for (int c = 0; c < kNumStates; ++c) {
            double sum = 0.0;
            for (std::size_t k = 0; k < rows.size(); ++k) sum += acc[k][j][c];
            out[j].per_state[c] = sum / double(rows.size());
            out[j].overall += out[j].per_state[c];
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const ImportanceEntry& a,
                                                const ImportanceEntry& b) {
        if (a.overall != b.overall) return a.overall > b.overall;
        return a.feature < b.feature;
    });
    return out;
}

// Importance ranked against a single state's explainer.
inline std::vector<ImportanceEntry> importance_for_state(const Model& model, const Tensor& X,
                                                         const std::vector<double>& baseline,
                                                         int state,
                                                         const ExplainOptions& opts = {}) {
    auto entries = importance(model, X, baseline, opts);
    std::stable_sort(entries.begin(), entries.end(),
                     [state](const ImportanceEntry& a, const ImportanceEntry& b) {
                         if (a.per_state[state] != b.per_state[state])
                             return a.per_state[state] > b.per_state[state];
                         return a.feature < b.feature;
                     });
    return entries;
}

// ---------------------------------------------------------------------------
// Pairwise interaction screening
// ---------------------------------------------------------------------------

struct PairScore {
    std::pair<std::size_t, std::size_t> features;
    double score = 0.0;
};

namespace detail {

// Exact pairwise interaction index from a full coalition table:
// I_ij = sum_{T without i,j} |T|! (p-|T|-2)! / (p-1)! * second difference.
inline void exact_interaction_scores(const Tensor& v, std::size_t p,
                                     std::vector<std::array<double, kNumStates>>& scores,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    std::vector<double> fact(p + 1, 1.0);
    for (std::size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * double(i);
    std::vector<double> w(p - 1);
    for (std::size_t s = 0; s + 2 <= p; ++s) w[s] = fact[s] * fact[p - s - 2] / fact[p - 1];

    std::size_t full = (std::size_t(1) << p) - 1;
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        auto [i, j] = pairs[t];
        std::size_t bi = std::size_t(1) << i, bj = std::size_t(1) << j;
        for (std::size_t m = 0; m <= full; ++m) {
            if (m & (bi | bj)) continue;
            auto s = static_cast<std::size_t>(std::popcount(m));
            for (int c = 0; c < kNumStates; ++c) {
                double d = v.at(m | bi | bj, c) - v.at(m | bi, c) - v.at(m | bj, c) +
                           v.at(m, c);
                scores[t][c] += w[s] * d;
            }
        }
    }
}

} // namespace detail

// Ranks feature pairs by the magnitude of their Shapley interaction index,
// averaged over a sample subset and the four state explainers. Exact
// enumeration up to the option limit, unbiased subset sampling beyond it.
inline std::vector<PairScore> interaction_screen(const Model& model, const Tensor& X,
                                                 const std::vector<double>& baseline,
                                                 std::size_t top_m,
                                                 const ExplainOptions& opts = {}) {
    std::size_t p = X.cols();
    auto pairs = upper_pairs(p);
    if (top_m > pairs.size())
        throw config_error("interaction_screen: top_m " + std::to_string(top_m) +
                           " exceeds the " + std::to_string(pairs.size()) + " feature pairs");
    auto rows = detail::subsample_rows(X.rows(), opts.max_samples, opts.seed);
    auto eval = risk_logits_eval(model);

    // per-sample, per-pair magnitudes summed over the four states
    std::vector<std::vector<double>> mags(rows.size(), std::vector<double>(pairs.size(), 0.0));

    parallel_for(rows.size(), [&](std::size_t k) {
        std::vector<double> x(p);
        for (std::size_t j = 0; j < p; ++j) x[j] = X.at(rows[k], j);

        std::vector<std::array<double, kNumStates>> scores(pairs.size());
        for (auto& s : scores) s.fill(0.0);

        if (p <= opts.exact_limit) {
            Tensor v = detail::coalition_table(eval, baseline, x);
            detail::exact_interaction_scores(v, p, scores, pairs);
        } else {
            auto rng = make_rng(substream_seed(opts.seed, "screen", rows[k]), "draws");
            std::size_t draws = std::max<std::size_t>(1, opts.screen_draws);
            // four hybrid rows per draw and pair: T, T+i, T+j, T+ij
            Tensor batch = Tensor::zeros(pairs.size() * draws * 4, p);
            std::size_t r = 0;
            std::vector<std::size_t> others(p);
            for (std::size_t t = 0; t < pairs.size(); ++t) {
                auto [i, j] = pairs[t];
                others.clear();
                for (std::size_t f = 0; f < p; ++f)
                    if (f != i && f != j) others.push_back(f);
                for (std::size_t d = 0; d < draws; ++d) {
                    std::size_t size = rng() % (p - 1); // 0 .. p-2
                    // partial Fisher-Yates: first `size` entries are the subset
                    for (std::size_t a = 0; a < size; ++a) {
                        std::size_t b = a + rng() % (others.size() - a);
                        std::swap(others[a], others[b]);
                    }
                    for (int variant = 0; variant < 4; ++variant) {
                        for (std::size_t f = 0; f < p; ++f) batch.at(r, f) = baseline[f];
                        for (std::size_t a = 0; a < size; ++a)
                            batch.at(r, others[a]) = x[others[a]];
                        if (variant & 1) batch.at(r, i) = x[i];
                        if (variant & 2) batch.at(r, j) = x[j];
                        ++r;
                    }
                }
            }
            Tensor v = detail::eval_chunked(eval, batch);
            r = 0;
            for (std::size_t t = 0; t < pairs.size(); ++t) {
                for (std::size_t d = 0; d < draws; ++d) {
                    for (int c = 0; c < kNumStates; ++c) {
                        double delta = v.at(r + 3, c) - v.at(r + 1, c) - v.at(r + 2, c) +
                                       v.at(r, c);
                        scores[t][c] += delta / double(draws);
                    }
                    r += 4;
                }
            }
        }
        for (std::size_t t = 0; t < pairs.size(); ++t)
            for (int c = 0; c < kNumStates; ++c) mags[k][t] += std::fabs(scores[t][c]);
    });

    std::vector<PairScore> out(pairs.size());
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        out[t].features = pairs[t];
        for (std::size_t k = 0; k < rows.size(); ++k) out[t].score += mags[k][t];
        out[t].score /= double(rows.size());
    }
    std::stable_sort(out.begin(), out.end(), [](const PairScore& a, const PairScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.features < b.features;
    });
    out.resize(top_m);
    return out;
}

// Distinct features appearing in the ranked pairs, in rank order.
inline std::vector<std::size_t> pair_feature_union(const std::vector<PairScore>& pairs) {
    std::vector<std::size_t> sel;
    auto add = [&sel](std::size_t f) {
        for (std::size_t s : sel)
            if (s == f) return;
        sel.push_back(f);
    };
    for (const auto& p : pairs) {
        add(p.features.first);
        add(p.features.second);
    }
    return sel;
}

// ---------------------------------------------------------------------------
// Force records and transition tendency
// ---------------------------------------------------------------------------

struct ForceEntry {
    std::size_t feature = 0;
    double value = 0.0; // the sample's feature value
    double phi = 0.0;
    bool increases = false;
};

struct ForceData {
    double base_value = 0.0;
    double prediction = 0.0;
    std::string target;
    std::vector<ForceEntry> entries; // |phi| descending, zero contributions dropped
};

inline ForceData force_data(const Explanation& exp, const std::vector<double>& x) {
    if (x.size() != exp.phi.size())
        throw shape_error("force_data: sample width does not match the attribution");
    ForceData out;
    out.base_value = exp.base_value;
    out.prediction = exp.prediction;
    out.target = exp.target;
    for (std::size_t j = 0; j < exp.phi.size(); ++j) {
        if (exp.phi[j] == 0.0) continue;
        out.entries.push_back(ForceEntry{j, x[j], exp.phi[j], exp.phi[j] > 0.0});
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const ForceEntry& a, const ForceEntry& b) {
                         return std::fabs(a.phi) > std::fabs(b.phi);
                     });
    return out;
}

// One line per contribution, strongest first: "+0.42 LSBP=162 (push)".
inline std::string force_text(const ForceData& fd,
                              const std::function<std::string(std::size_t)>& feature_name) {
    std::ostringstream os;
    os << fd.target << ": base " << fd.base_value << " -> prediction " << fd.prediction << '\n';
    for (const auto& e : fd.entries) {
        os << (e.phi > 0 ? "  +" : "  ") << e.phi << ' ' << feature_name(e.feature) << '='
           << e.value << (e.increases ? " (push)" : " (pull)") << '\n';
    }
    return os.str();
}

// Runner-up state whose score reaches the threshold fraction of the top
// score; flags a possible state transition for the clinician.
struct TransitionTendency {
    int top_state = 0;
    std::optional<int> toward;
    double ratio = 0.0;
};

inline TransitionTendency transition_tendency(const std::vector<double>& scores,
                                              double threshold = 0.5) {
    if (scores.size() < 2) throw config_error("transition_tendency: need at least two scores");
    TransitionTendency out;
    out.top_state = argmax_class(scores);
    int runner = -1;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (static_cast<int>(i) == out.top_state) continue;
        if (runner < 0 || scores[i] > scores[static_cast<std::size_t>(runner)])
            runner = static_cast<int>(i);
    }
    double top = scores[static_cast<std::size_t>(out.top_state)];
    if (top > 0.0) {
        out.ratio = scores[static_cast<std::size_t>(runner)] / top;
        if (out.ratio >= threshold) out.toward = runner;
    }
    return out;
}

// Raw dependence triples for a feature against its strongest companion:
// (feature value, phi, companion value) per sample.
struct DependenceTriple {
    double value = 0.0;
    double phi = 0.0;
    double companion_value = 0.0;
};

inline std::vector<DependenceTriple> dependence_triples(const Model& model, const Tensor& X,
                                                        const std::vector<double>& baseline,
                                                        std::size_t feature,
                                                        std::size_t companion, int state,
                                                        const ExplainOptions& opts = {}) {
    if (feature >= X.cols() || companion >= X.cols())
        throw config_error("dependence: feature index out of range");
    auto rows = detail::subsample_rows(X.rows(), opts.max_samples, opts.seed);
    auto eval = risk_logits_eval(model);
    std::vector<DependenceTriple> out(rows.size());
    parallel_for(rows.size(), [&](std::size_t k) {
        std::vector<double> x(X.cols());
        for (std::size_t j = 0; j < X.cols(); ++j) x[j] = X.at(rows[k], j);
        std::vector<Explanation> exps =
            x.size() <= opts.exact_limit
                ? shapley_exact_multi(eval, baseline, x, opts.exact_limit)
                : shapley_sampled_multi(eval, baseline, x, opts.n_permutations,
                                        substream_seed(opts.seed, "dependence", rows[k]));
        out[k] = DependenceTriple{x[feature], exps[static_cast<std::size_t>(state)].phi[feature],
                                  x[companion]};
    });
    return out;
}

} // namespace riskgrid

#endif

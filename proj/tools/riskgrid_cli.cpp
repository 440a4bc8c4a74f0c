// riskgrid: synthesize cohorts, train the three risk models, evaluate,
// explain predictions, screen feature interactions, export projections.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 model/compat error.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "riskgrid/checkpoint.hpp"
#include "riskgrid/dataset.hpp"
#include "riskgrid/explain.hpp"
#include "riskgrid/manifest.hpp"
#include "riskgrid/metrics.hpp"
#include "riskgrid/models.hpp"
#include "riskgrid/schema.hpp"
#include "riskgrid/svg.hpp"
#include "riskgrid/synth.hpp"
#include "riskgrid/training.hpp"

using namespace riskgrid;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;

struct CliTrainSettings {
    TrainConfig train;
    double test_fraction = 0.15;
};

CliTrainSettings load_train_settings(const std::string& config_path) {
    CliTrainSettings s;
    if (config_path.empty()) return s;
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(config_path));
    } catch (const std::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    auto get = [&j](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("learning_rate", s.train.learning_rate);
    get("max_epochs", s.train.max_epochs);
    get("batch_size", s.train.batch_size);
    get("patience", s.train.patience);
    get("validation_fraction", s.train.validation_fraction);
    get("stroke_weight", s.train.stroke_weight);
    get("risk_weight", s.train.risk_weight);
    get("test_fraction", s.test_fraction);
    s.train.validate();
    if (!(s.test_fraction > 0.0 && s.test_fraction < 1.0))
        throw config_error("config: test_fraction must be in (0,1)");
    return s;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::string trace_path_for(const std::string& out) {
    std::string stem = out;
    if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json")
        stem.resize(stem.size() - 5);
    return stem + ".trace.csv";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t n = 20531;
    std::string ratios = "7221,5868,5475,1967";
    double interaction_strength = 2.0;
    double noise = 0.05;
    std::uint64_t seed = 7;
};

int run_synth(const SynthArgs& args) {
    auto schema = default_schema();
    SynthConfig cfg = default_synth_config(schema);
    cfg.n = args.n;
    cfg.interaction_strength = args.interaction_strength;
    cfg.noise = args.noise;
    cfg.seed = args.seed;
    {
        std::istringstream rs(args.ratios);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(rs, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != 4) throw config_error("synth: --ratios needs four values");
        for (int c = 0; c < 4; ++c) cfg.class_ratios[c] = vals[c];
    }

    RunManifest manifest;
    manifest.command = "synth";
    manifest.started_at = utc_timestamp();
    manifest.seed = args.seed;
    manifest.config = ordered_json{{"n", cfg.n},
                                   {"ratios", cfg.class_ratios},
                                   {"interaction_strength", cfg.interaction_strength},
                                   {"noise", cfg.noise},
                                   {"seed", cfg.seed}};

    Dataset ds = synth(schema, cfg);
    atomic_write(args.out, csv_string(ds));
    manifest.add_output(args.out);
    manifest.write(args.out + ".manifest.json");

    auto counts = ds.class_counts();
    std::cout << "wrote " << ds.size() << " samples to " << args.out << " (low " << counts[0]
              << ", medium " << counts[1] << ", high " << counts[2] << ", attack " << counts[3]
              << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string model;
    std::string data;
    std::string out;
    std::string qi_pairs;   // "auto:N" or "A-B;C-D" (abbrevs or indices)
    int top_k = -1;         // -1: model default
    std::string config_path;
    std::uint64_t seed = 7;
};

std::size_t parse_feature_ref(const std::string& tok, const FeatureSchema& schema) {
    try {
        std::size_t pos = 0;
        auto idx = std::stoul(tok, &pos);
        if (pos == tok.size()) {
            if (idx >= schema.size())
                throw config_error("train: feature index " + tok + " out of range");
            return idx;
        }
    } catch (const std::invalid_argument&) {
    } catch (const std::out_of_range&) {
    }
    return schema.index_of(tok);
}

std::vector<std::pair<std::size_t, std::size_t>> parse_pair_list(const std::string& text,
                                                                 const FeatureSchema& schema) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        auto dash = item.find('-');
        if (dash == std::string::npos)
            throw config_error("train: pair '" + item + "' must look like A-B");
        pairs.emplace_back(parse_feature_ref(item.substr(0, dash), schema),
                           parse_feature_ref(item.substr(dash + 1), schema));
    }
    if (pairs.empty()) throw config_error("train: --qi-pairs lists no pairs");
    return pairs;
}

// Maps raw schema indices into the model-input coordinate system.
std::size_t model_index_of(const std::vector<std::size_t>& feature_indices, std::size_t raw,
                           const FeatureSchema& schema) {
    for (std::size_t j = 0; j < feature_indices.size(); ++j)
        if (feature_indices[j] == raw) return j;
    throw config_error("train: feature '" + schema[raw].abbrev +
                       "' is outside the selected input columns");
}

int run_train(const TrainArgs& args) {
    auto schema = default_schema();
    auto settings = load_train_settings(args.config_path);
    settings.train.seed = args.seed;

    Dataset raw = load_csv(args.data, schema);
    if (raw.schema.fingerprint() != schema.fingerprint())
        throw compat_error("train: data schema fingerprint mismatch");

    auto split = stratified_split(raw, settings.test_fraction, args.seed);
    auto stats = compute_stats(raw, split.train);
    Dataset prepared = normalize(impute(raw, stats), stats);

    Tensor X_train_full = prepared.subset(split.train).matrix(prepared.all_columns());
    std::vector<int> y_train;
    for (auto r : split.train) y_train.push_back(raw.samples[r].risk_state);

    // defaults per model kind
    int top_k = args.top_k;
    std::string qi_pairs = args.qi_pairs;
    if (args.model == "base-dnn" && !qi_pairs.empty())
        throw config_error("train: --qi-pairs only applies to qidnn and mmoe");
    if (args.model == "mmoe") {
        if (top_k < 0) top_k = 20;
        if (qi_pairs.empty()) qi_pairs = "auto:3";
    }
    if (top_k == 0) top_k = -1; // 0 means "all features"

    bool wants_auto_pairs = qi_pairs.rfind("auto:", 0) == 0;
    bool wants_top_k = top_k > 0 && static_cast<std::size_t>(top_k) < schema.size();

    // One screening model serves both feature ranking and pair screening.
    std::vector<std::size_t> feature_indices = prepared.all_columns();
    std::vector<std::pair<std::size_t, std::size_t>> raw_pairs;
    if (wants_auto_pairs || wants_top_k) {
        BaseDnnModel probe(BaseDNNSpec{schema.size(), 17, 8, 4},
                           substream_seed(args.seed, "screen-model"));
        TrainConfig probe_cfg = settings.train;
        probe_cfg.seed = substream_seed(args.seed, "screen-train");
        probe_cfg.max_epochs = std::min<std::size_t>(probe_cfg.max_epochs, 60);
        probe_cfg.patience = std::min<std::size_t>(probe_cfg.patience, 5);
        train_model(probe, X_train_full, y_train, probe_cfg);

        ExplainOptions opts;
        opts.seed = substream_seed(args.seed, "screen-explain");
        opts.max_samples = 48;
        opts.n_permutations = 64;
        opts.screen_draws = 6;
        auto baseline = baseline_vector(schema, stats);

        if (wants_top_k) {
            auto ranked = importance(probe, X_train_full, baseline, opts);
            feature_indices.clear();
            for (int k = 0; k < top_k; ++k) feature_indices.push_back(ranked[k].feature);
        }
        if (wants_auto_pairs) {
            auto n_pairs = static_cast<std::size_t>(std::stoul(qi_pairs.substr(5)));
            auto all_ranked = interaction_screen(
                probe, X_train_full, baseline,
                schema.size() * (schema.size() - 1) / 2, opts);
            for (const auto& ps : all_ranked) {
                if (raw_pairs.size() == n_pairs) break;
                bool inside = true;
                if (wants_top_k) {
                    auto in = [&](std::size_t f) {
                        for (auto fi : feature_indices)
                            if (fi == f) return true;
                        return false;
                    };
                    inside = in(ps.features.first) && in(ps.features.second);
                }
                if (inside) raw_pairs.push_back(ps.features);
            }
            if (raw_pairs.size() != n_pairs)
                throw config_error("train: could not screen " + std::to_string(n_pairs) +
                                   " pairs inside the selected features");
        }
    }
    if (!qi_pairs.empty() && !wants_auto_pairs) raw_pairs = parse_pair_list(qi_pairs, schema);

    // assemble the model
    ModelBundle bundle;
    bundle.feature_indices = feature_indices;
    bundle.schema_fingerprint = schema.fingerprint();
    bundle.stats = stats;

    const auto d = feature_indices.size();
    if (args.model == "base-dnn") {
        bundle.model = std::make_unique<BaseDnnModel>(BaseDNNSpec{d, 17, 8, 4}, args.seed);
    } else if (args.model == "qidnn" || args.model == "mmoe") {
        QISpec qi;
        qi.latent_len = 4;
        if (!raw_pairs.empty()) {
            std::vector<PairScore> scored;
            for (const auto& p : raw_pairs) scored.push_back(PairScore{p, 0.0});
            for (auto f : pair_feature_union(scored))
                qi.selected.push_back(model_index_of(feature_indices, f, schema));
        } else {
            for (auto f : default_qi_selected(schema))
                qi.selected.push_back(model_index_of(feature_indices, f, schema));
        }
        if (args.model == "qidnn") {
            auto model = std::make_unique<QidnnModel>(BaseDNNSpec{d, 17, 8, 4}, qi, args.seed);
            model->screened_pairs = raw_pairs;
            bundle.model = std::move(model);
        } else {
            MMOESpec ms;
            ms.input_dim = d;
            ms.expert2_qi = qi;
            auto model = std::make_unique<MmoeModel>(ms, args.seed);
            model->screened_pairs = raw_pairs;
            bundle.model = std::move(model);
        }
    } else {
        throw config_error("train: unknown model '" + args.model + "'");
    }

    Tensor X = prepared.subset(split.train).matrix(feature_indices);
    auto trace = train_model(*bundle.model, X, y_train, settings.train);

    bundle.meta.seed = args.seed;
    bundle.meta.epochs_run = trace.stopped_at_epoch;
    bundle.meta.best_epoch = trace.best_epoch;
    bundle.meta.final_train_loss = trace.records.back().train_loss;
    bundle.meta.best_val_loss = trace.records[trace.best_epoch - 1].val_loss;
    bundle.meta.test_fraction = settings.test_fraction;
    bundle.meta.split_seed = args.seed;
    bundle.meta.data_checksum = checksum_file(args.data);

    RunManifest manifest;
    manifest.command = "train";
    manifest.started_at = utc_timestamp();
    manifest.seed = args.seed;
    manifest.config = ordered_json{{"model", args.model},
                                   {"data", args.data},
                                   {"qi_pairs", qi_pairs},
                                   {"top_k_features", top_k},
                                   {"learning_rate", settings.train.learning_rate},
                                   {"max_epochs", settings.train.max_epochs},
                                   {"batch_size", settings.train.batch_size},
                                   {"patience", settings.train.patience},
                                   {"validation_fraction", settings.train.validation_fraction},
                                   {"test_fraction", settings.test_fraction}};
    manifest.add_input(args.data);

    atomic_write(args.out, checkpoint_to_json(bundle).dump(2) + "\n");
    std::string trace_path = trace_path_for(args.out);
    atomic_write(trace_path, trace_csv(trace));
    manifest.add_output(args.out);
    manifest.add_output(trace_path);
    manifest.write(args.out + ".manifest.json");

    std::cout << "trained " << args.model << " on " << X.rows() << " rows, "
              << trace.stopped_at_epoch << " epochs (best " << trace.best_epoch
              << ", val loss " << trace.records[trace.best_epoch - 1].val_loss << ")\n";
    if (!raw_pairs.empty()) {
        std::cout << "interaction pairs:";
        for (const auto& p : raw_pairs)
            std::cout << ' ' << schema[p.first].abbrev << '-' << schema[p.second].abbrev;
        std::cout << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string model_path;
    std::string data;
    std::string split = "test";
    std::string out;
};

std::vector<std::size_t> rows_for_split(const Dataset& raw, const ModelBundle& bundle,
                                        const std::string& split) {
    if (split == "all") return all_rows(raw);
    auto s = stratified_split(raw, bundle.meta.test_fraction, bundle.meta.split_seed);
    if (split == "train") return s.train;
    if (split == "test") return s.test;
    throw config_error("eval: --split must be test, train or all");
}

struct EvalResult {
    ClassificationReport risk;
    bool has_stroke = false;
    double stroke_precision = 0.0, stroke_recall = 0.0, stroke_f1 = 0.0;
    double stroke_auc = std::numeric_limits<double>::quiet_NaN();
};

EvalResult evaluate_bundle(const ModelBundle& bundle, const Dataset& raw,
                           const std::vector<std::size_t>& rows) {
    Tensor X = bundle.model_matrix(raw, rows);
    std::vector<int> truth;
    for (auto r : rows) truth.push_back(raw.samples[r].risk_state);

    Tensor probs = bundle.model->predict_risk_probs(X);
    std::vector<int> pred(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> row(4);
        for (int c = 0; c < 4; ++c) row[c] = probs.at(i, static_cast<std::size_t>(c));
        pred[i] = argmax_class(row);
    }
    EvalResult res;
    res.risk = report(truth, pred);

    if (bundle.kind() == ModelKind::mmoe) {
        res.has_stroke = true;
        auto p = bundle.model->predict_stroke_prob(X);
        std::size_t tp = 0, fp = 0, fn = 0;
        std::vector<int> ybin(rows.size());
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ybin[i] = truth[i] == kAttack ? 1 : 0;
            (ybin[i] ? pos : neg) = true;
            bool hit = p[i] >= 0.5;
            if (hit && ybin[i]) tp++;
            if (hit && !ybin[i]) fp++;
            if (!hit && ybin[i]) fn++;
        }
        res.stroke_precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        res.stroke_recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
        res.stroke_f1 = f1_score(res.stroke_precision, res.stroke_recall);
        if (pos && neg) res.stroke_auc = auc(p, ybin);
    }
    return res;
}

void print_report(const EvalResult& res) {
    std::printf("%-12s %12s %10s %8s %9s\n", "Risk state", "Precision(%)", "Recall(%)", "F1(%)",
                "Support");
    for (int c = 0; c < kNumStates; ++c) {
        const auto& r = res.risk.per_class[c];
        std::printf("%-12s %12s %10s %8s %9zu%s\n", kStateNames[c], pct(r.precision).c_str(),
                    pct(r.recall).c_str(), pct(r.f1).c_str(), r.support,
                    r.never_predicted ? "  (never predicted)" : "");
    }
    std::printf("accuracy %s%%   mean recall %s%%\n", pct(res.risk.accuracy).c_str(),
                pct(res.risk.mean_recall).c_str());
    if (res.has_stroke) {
        std::printf("\nStroke occurrence (binary head)\n");
        std::printf("%12s %10s %8s %8s\n", "Precision(%)", "Recall(%)", "F1(%)", "AUC");
        char aucbuf[32];
        std::snprintf(aucbuf, sizeof aucbuf, "%.4f", res.stroke_auc);
        std::printf("%12s %10s %8s %8s\n", pct(res.stroke_precision).c_str(),
                    pct(res.stroke_recall).c_str(), pct(res.stroke_f1).c_str(),
                    std::isnan(res.stroke_auc) ? "n/a" : aucbuf);
    }
}

ordered_json report_json(const EvalResult& res, const ModelBundle& bundle,
                         const std::string& split, std::size_t n) {
    ordered_json per_class = ordered_json::array();
    for (int c = 0; c < kNumStates; ++c) {
        const auto& r = res.risk.per_class[c];
        per_class.push_back(ordered_json{{"state", kStateNames[c]},
                                         {"precision", r.precision},
                                         {"recall", r.recall},
                                         {"f1", r.f1},
                                         {"support", r.support},
                                         {"never_predicted", r.never_predicted}});
    }
    ordered_json j{{"model_kind", model_kind_name(bundle.kind())},
                   {"split", split},
                   {"n", n},
                   {"per_class", per_class},
                   {"accuracy", res.risk.accuracy},
                   {"mean_recall", res.risk.mean_recall}};
    if (res.has_stroke) {
        ordered_json stroke{{"precision", res.stroke_precision},
                            {"recall", res.stroke_recall},
                            {"f1", res.stroke_f1}};
        if (!std::isnan(res.stroke_auc)) stroke["auc"] = res.stroke_auc;
        j["stroke"] = stroke;
    }
    return j;
}

int run_eval(const EvalArgs& args) {
    auto schema = default_schema();
    ModelBundle bundle = load_checkpoint(args.model_path);
    if (bundle.schema_fingerprint != schema.fingerprint())
        throw compat_error("eval: checkpoint schema fingerprint does not match the data schema");
    Dataset raw = load_csv(args.data, schema);
    auto rows = rows_for_split(raw, bundle, args.split);
    if (rows.empty()) throw data_error("eval: split selected no rows");

    EvalResult res = evaluate_bundle(bundle, raw, rows);
    print_report(res);

    if (!args.out.empty()) {
        RunManifest manifest;
        manifest.command = "eval";
        manifest.started_at = utc_timestamp();
        manifest.seed = bundle.meta.seed;
        manifest.config = ordered_json{{"model_path", args.model_path},
                                       {"data", args.data},
                                       {"split", args.split}};
        manifest.add_input(args.model_path);
        manifest.add_input(args.data);
        atomic_write(args.out, report_json(res, bundle, args.split, rows.size()).dump(2) + "\n");
        manifest.add_output(args.out);
        manifest.write(args.out + ".manifest.json");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainArgs {
    std::string model_path;
    std::string data;
    long long sample_id = -1;
    std::string out_svg;  // prefix; one file per state
    std::string out_json;
    std::size_t n_permutations = 128;
    double transition_threshold = 0.5;
    std::uint64_t seed = 7;
};

int run_explain(const ExplainArgs& args) {
    auto schema = default_schema();
    ModelBundle bundle = load_checkpoint(args.model_path);
    if (bundle.schema_fingerprint != schema.fingerprint())
        throw compat_error("explain: checkpoint schema fingerprint mismatch");
    Dataset raw = load_csv(args.data, schema);
    if (args.sample_id < 0 || static_cast<std::size_t>(args.sample_id) >= raw.size())
        throw data_error("explain: sample id " + std::to_string(args.sample_id) +
                         " not found in " + std::to_string(raw.size()) + " rows");
    auto id = static_cast<std::size_t>(args.sample_id);

    Tensor X = bundle.model_matrix(raw, {id});
    std::vector<double> x(X.cols());
    for (std::size_t j = 0; j < X.cols(); ++j) x[j] = X.at(0, j);
    auto baseline = bundle.model_baseline(schema);

    ExplainOptions opts;
    opts.n_permutations = args.n_permutations;
    opts.seed = args.seed;
    auto exps = explain_states(*bundle.model, x, baseline, opts);
    for (auto& e : exps) e.sample_id = id;

    Tensor probs_t = bundle.model->predict_risk_probs(X);
    std::vector<double> probs(4);
    for (int c = 0; c < 4; ++c) probs[c] = probs_t.at(0, static_cast<std::size_t>(c));
    auto tendency = transition_tendency(probs, args.transition_threshold);

    // raw display values for the model's input columns
    Dataset imputed = impute(raw, bundle.stats);
    std::vector<double> raw_vals(bundle.feature_indices.size());
    for (std::size_t j = 0; j < bundle.feature_indices.size(); ++j)
        raw_vals[j] = *imputed.samples[id].features[bundle.feature_indices[j]];

    RunManifest manifest;
    manifest.command = "explain";
    manifest.started_at = utc_timestamp();
    manifest.seed = args.seed;
    manifest.config = ordered_json{{"model_path", args.model_path},
                                   {"data", args.data},
                                   {"sample_id", id},
                                   {"n_permutations", args.n_permutations},
                                   {"transition_threshold", args.transition_threshold}};
    manifest.add_input(args.model_path);
    manifest.add_input(args.data);

    ordered_json explanations = ordered_json::array();
    for (int c = 0; c < kNumStates; ++c) {
        ordered_json phi = ordered_json::array();
        for (std::size_t j = 0; j < x.size(); ++j)
            phi.push_back(
                ordered_json{{"feature", schema[bundle.feature_indices[j]].abbrev},
                             {"value", raw_vals[j]},
                             {"phi", exps[c].phi[j]}});
        explanations.push_back(ordered_json{{"sample_id", id},
                                            {"target", exps[c].target},
                                            {"base_value", exps[c].base_value},
                                            {"prediction", exps[c].prediction},
                                            {"phi", phi}});
        ForceData fd = force_data(exps[c], raw_vals);
        std::string svg = force_plot_svg(fd, schema, bundle.feature_indices,
                                         std::string("state: ") + kStateNames[c]);
        std::string path = args.out_svg + "_" + kStateNames[c] + ".svg";
        atomic_write(path, svg);
        manifest.add_output(path);
    }

    ordered_json out{{"sample_id", id},
                     {"predicted_state", kStateNames[tendency.top_state]},
                     {"probabilities", probs},
                     {"transition",
                      ordered_json{{"flagged", tendency.toward.has_value()},
                                   {"toward", tendency.toward ? kStateNames[*tendency.toward]
                                                              : ""},
                                   {"runner_up_ratio", tendency.ratio},
                                   {"threshold", args.transition_threshold}}},
                     {"explanations", explanations}};
    atomic_write(args.out_json, out.dump(2) + "\n");
    manifest.add_output(args.out_json);
    manifest.write(args.out_json + ".manifest.json");

    std::cout << "sample " << id << ": predicted " << kStateNames[tendency.top_state];
    if (tendency.toward)
        std::cout << ", transition tendency toward " << kStateNames[*tendency.toward]
                  << " (runner-up ratio " << tendency.ratio << ")";
    else
        std::cout << ", no transition tendency";
    std::cout << '\n';

    ForceData top_fd = force_data(exps[tendency.top_state], raw_vals);
    if (top_fd.entries.size() > 8) top_fd.entries.resize(8);
    std::cout << force_text(top_fd, [&](std::size_t f) {
        return schema[bundle.feature_indices[f]].abbrev;
    });
    return 0;
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

struct ProjectArgs {
    std::string model_path;
    std::string data;
    std::string out;
};

int run_project(const ProjectArgs& args) {
    auto schema = default_schema();
    ModelBundle bundle = load_checkpoint(args.model_path);
    if (bundle.schema_fingerprint != schema.fingerprint())
        throw compat_error("project: checkpoint schema fingerprint mismatch");
    if (bundle.kind() != ModelKind::base_dnn)
        throw compat_error("project: model '" + std::string(model_kind_name(bundle.kind())) +
                           "' has no visualization layer");
    Dataset raw = load_csv(args.data, schema);
    auto rows = all_rows(raw);
    Tensor X = bundle.model_matrix(raw, rows);

    Tape t;
    auto fwd = bundle.model->forward(t, X);
    const Tensor& viz = t.value(*fwd.viz);

    std::ostringstream csv;
    csv << "sample_id,risk_state";
    for (int c = 0; c < kNumStates; ++c)
        csv << ',' << kStateNames[c] << "_x," << kStateNames[c] << "_y";
    csv << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        csv << rows[i] << ',' << raw.samples[rows[i]].risk_state;
        for (std::size_t k = 0; k < viz.cols(); ++k)
            csv << ',' << detail::format_double(viz.at(i, k));
        csv << '\n';
    }

    RunManifest manifest;
    manifest.command = "project";
    manifest.started_at = utc_timestamp();
    manifest.seed = bundle.meta.seed;
    manifest.config = ordered_json{{"model_path", args.model_path}, {"data", args.data}};
    manifest.add_input(args.model_path);
    manifest.add_input(args.data);
    atomic_write(args.out, csv.str());
    manifest.add_output(args.out);
    manifest.write(args.out + ".manifest.json");
    std::cout << "wrote " << rows.size() << " projections to " << args.out << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// screen
// ---------------------------------------------------------------------------

struct ScreenArgs {
    std::string model_path;
    std::string data;
    std::size_t top_m = 7;
    std::size_t max_samples = 48;
    std::uint64_t seed = 7;
    std::string out;
    std::string dependence;     // "A,B"
    std::string out_dependence;
};

int run_screen(const ScreenArgs& args) {
    auto schema = default_schema();
    ModelBundle bundle = load_checkpoint(args.model_path);
    if (bundle.schema_fingerprint != schema.fingerprint())
        throw compat_error("screen: checkpoint schema fingerprint mismatch");
    Dataset raw = load_csv(args.data, schema);
    auto rows = all_rows(raw);
    Tensor X = bundle.model_matrix(raw, rows);
    auto baseline = bundle.model_baseline(schema);

    ExplainOptions opts;
    opts.seed = args.seed;
    opts.max_samples = args.max_samples;
    auto ranked = interaction_screen(*bundle.model, X, baseline, args.top_m, opts);

    ordered_json pairs = ordered_json::array();
    for (const auto& ps : ranked) {
        const auto& a = schema[bundle.feature_indices[ps.features.first]].abbrev;
        const auto& b = schema[bundle.feature_indices[ps.features.second]].abbrev;
        std::printf("%-8s %-8s %.6g\n", a.c_str(), b.c_str(), ps.score);
        pairs.push_back(ordered_json{{"a", a}, {"b", b}, {"score", ps.score}});
    }

    RunManifest manifest;
    manifest.command = "screen";
    manifest.started_at = utc_timestamp();
    manifest.seed = args.seed;
    manifest.config = ordered_json{{"model_path", args.model_path},
                                   {"data", args.data},
                                   {"top_m", args.top_m},
                                   {"max_samples", args.max_samples}};
    manifest.add_input(args.model_path);
    manifest.add_input(args.data);

    bool wrote_any = false;
    if (!args.out.empty()) {
        atomic_write(args.out, ordered_json{{"pairs", pairs}}.dump(2) + "\n");
        manifest.add_output(args.out);
        wrote_any = true;
    }
    if (!args.dependence.empty()) {
        if (args.out_dependence.empty())
            throw config_error("screen: --dependence needs --out-dependence");
        auto comma = args.dependence.find(',');
        if (comma == std::string::npos)
            throw config_error("screen: --dependence must look like A,B");
        auto fa = model_index_of(bundle.feature_indices,
                                 parse_feature_ref(args.dependence.substr(0, comma), schema),
                                 schema);
        auto fb = model_index_of(bundle.feature_indices,
                                 parse_feature_ref(args.dependence.substr(comma + 1), schema),
                                 schema);
        auto triples = dependence_triples(*bundle.model, X, baseline, fa, fb, kHigh, opts);
        std::ostringstream csv;
        csv << "value,phi,companion_value\n";
        for (const auto& tr : triples)
            csv << detail::format_double(tr.value) << ',' << detail::format_double(tr.phi) << ','
                << detail::format_double(tr.companion_value) << '\n';
        atomic_write(args.out_dependence, csv.str());
        manifest.add_output(args.out_dependence);
        wrote_any = true;
    }
    if (wrote_any) {
        std::string mpath = (args.out.empty() ? args.out_dependence : args.out) +
                            ".manifest.json";
        manifest.write(mpath);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stroke-risk modeling toolkit: four-state classifiers, quadratic feature "
                 "interactions, multi-objective training and Shapley explanations"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic cohort CSV");
    cmd_synth->add_option("--out", synth_args.out, "output CSV path")->required();
    cmd_synth->add_option("--n", synth_args.n, "number of samples");
    cmd_synth->add_option("--ratios", synth_args.ratios, "four class ratios, comma separated");
    cmd_synth->add_option("--interaction-strength", synth_args.interaction_strength,
                          "planted pairwise interaction strength");
    cmd_synth->add_option("--noise", synth_args.noise, "label noise fraction in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    cmd_synth->add_option("--seed", synth_args.seed, "random seed");

    TrainArgs train_args;
    auto* cmd_train = app.add_subcommand("train", "train a model and write a checkpoint");
    cmd_train->add_option("--model", train_args.model, "base-dnn, qidnn or mmoe")
        ->required()
        ->check(CLI::IsMember({"base-dnn", "qidnn", "mmoe"}));
    cmd_train->add_option("--data", train_args.data, "training CSV")->required();
    cmd_train->add_option("--out", train_args.out, "checkpoint JSON path")->required();
    cmd_train->add_option("--qi-pairs", train_args.qi_pairs,
                          "auto:N or explicit pairs like LSBP-Exs;Sm-LDBP");
    cmd_train->add_option("--top-k-features", train_args.top_k,
                          "restrict inputs to the K most important features");
    cmd_train->add_option("--config", train_args.config_path, "training config JSON");
    cmd_train->add_option("--seed", train_args.seed, "random seed");

    EvalArgs eval_args;
    auto* cmd_eval = app.add_subcommand("eval", "classification report on a data split");
    cmd_eval->add_option("--model-path", eval_args.model_path, "checkpoint JSON")->required();
    cmd_eval->add_option("--data", eval_args.data, "data CSV")->required();
    cmd_eval->add_option("--split", eval_args.split, "test, train or all")
        ->check(CLI::IsMember({"test", "train", "all"}));
    cmd_eval->add_option("--out", eval_args.out, "report JSON path");

    ExplainArgs explain_args;
    auto* cmd_explain =
        app.add_subcommand("explain", "per-state attribution and force plots for one sample");
    cmd_explain->add_option("--model-path", explain_args.model_path, "checkpoint JSON")
        ->required();
    cmd_explain->add_option("--data", explain_args.data, "data CSV")->required();
    cmd_explain->add_option("--sample-id", explain_args.sample_id, "row index in the CSV")
        ->required();
    cmd_explain->add_option("--out-svg", explain_args.out_svg, "SVG path prefix")->required();
    cmd_explain->add_option("--out-json", explain_args.out_json, "attribution JSON path")
        ->required();
    cmd_explain->add_option("--n-permutations", explain_args.n_permutations,
                            "sampling budget for wide inputs");
    cmd_explain->add_option("--transition-threshold", explain_args.transition_threshold,
                            "runner-up fraction that flags a transition tendency");
    cmd_explain->add_option("--seed", explain_args.seed, "random seed");

    ProjectArgs project_args;
    auto* cmd_project =
        app.add_subcommand("project", "export the 2x4 visualization-layer coordinates");
    cmd_project->add_option("--model-path", project_args.model_path, "checkpoint JSON")
        ->required();
    cmd_project->add_option("--data", project_args.data, "data CSV")->required();
    cmd_project->add_option("--out", project_args.out, "projection CSV path")->required();

    ScreenArgs screen_args;
    auto* cmd_screen =
        app.add_subcommand("screen", "rank pairwise feature interactions of a trained model");
    cmd_screen->add_option("--model-path", screen_args.model_path, "checkpoint JSON")
        ->required();
    cmd_screen->add_option("--data", screen_args.data, "data CSV")->required();
    cmd_screen->add_option("--top-m", screen_args.top_m, "pairs to keep");
    cmd_screen->add_option("--max-samples", screen_args.max_samples, "sample subset size");
    cmd_screen->add_option("--seed", screen_args.seed, "random seed");
    cmd_screen->add_option("--out", screen_args.out, "ranked pairs JSON path");
    cmd_screen->add_option("--dependence", screen_args.dependence,
                           "export dependence triples for a feature pair A,B");
    cmd_screen->add_option("--out-dependence", screen_args.out_dependence,
                           "dependence CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (app.got_subcommand(cmd_synth)) return run_synth(synth_args);
        if (app.got_subcommand(cmd_train)) return run_train(train_args);
        if (app.got_subcommand(cmd_eval)) return run_eval(eval_args);
        if (app.got_subcommand(cmd_explain)) return run_explain(explain_args);
        if (app.got_subcommand(cmd_project)) return run_project(project_args);
        if (app.got_subcommand(cmd_screen)) return run_screen(screen_args);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const compat_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitModel;
    } catch (const train_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitModel;
    } catch (const shape_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitModel;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#ifndef RISKGRID_METRICS_HPP
#define RISKGRID_METRICS_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "riskgrid/errors.hpp"

namespace riskgrid {

inline constexpr int kNumStates = 4;
inline constexpr const char* kStateNames[kNumStates] = {"low", "medium", "high", "attack"};

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumStates>, kNumStates> counts{};
    std::array<std::size_t, kNumStates> supports{};
    std::size_t total = 0;
};

struct ClassReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    bool never_predicted = false; // precision was forced to 0
};

struct ClassificationReport {
    std::array<ClassReport, kNumStates> per_class{};
    double accuracy = 0.0;
    double mean_recall = 0.0;
    ConfusionMatrix confusion;
};

// argmax with lowest-index tie-break.
inline int argmax_class(const std::vector<double>& scores) {
    if (scores.empty()) throw shape_error("argmax_class: empty scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return static_cast<int>(best);
}

inline ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                        const std::vector<int>& pred) {
    if (truth.size() != pred.size())
        throw data_error("confusion_matrix: label vectors differ in length");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= kNumStates || pred[i] < 0 || pred[i] >= kNumStates)
            throw data_error("confusion_matrix: label out of range at index " +
                             std::to_string(i));
        cm.counts[truth[i]][pred[i]]++;
        cm.supports[truth[i]]++;
        cm.total++;
    }
    return cm;
}

inline double f1_score(double precision, double recall) {
    double s = precision + recall;
    return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

// Per-class precision/recall/F1 plus accuracy and macro mean recall.
// A class never predicted gets precision 0 and is flagged, not an error.
inline ClassificationReport report(const std::vector<int>& truth, const std::vector<int>& pred) {
    ClassificationReport rep;
    rep.confusion = confusion_matrix(truth, pred);
    const ConfusionMatrix& cm = rep.confusion;

    std::size_t correct = 0;
    double recall_sum = 0.0;
    for (int c = 0; c < kNumStates; ++c) {
        std::size_t tp = cm.counts[c][c];
        std::size_t fn = cm.supports[c] - tp;
        std::size_t fp = 0;
        for (int r = 0; r < kNumStates; ++r)
            if (r != c) fp += cm.counts[r][c];
        ClassReport& cr = rep.per_class[c];
        cr.support = cm.supports[c];
        cr.never_predicted = (tp + fp) == 0;
        cr.precision = cr.never_predicted ? 0.0 : double(tp) / double(tp + fp);
        cr.recall = (tp + fn) == 0 ? 0.0 : double(tp) / double(tp + fn);
        cr.f1 = f1_score(cr.precision, cr.recall);
        correct += tp;
        recall_sum += cr.recall;
    }
    rep.accuracy = cm.total == 0 ? 0.0 : double(correct) / double(cm.total);
    rep.mean_recall = recall_sum / double(kNumStates);
    return rep;
}

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties counting one half. Average-rank computation, O(m log m).
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw data_error("auc: scores and labels differ in length");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels) {
        if (y == 1)
            n_pos++;
        else if (y == 0)
            n_neg++;
        else
            throw data_error("auc: labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0)
        throw data_error("auc: undefined, needs at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * double(i + 1 + j); // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    return (rank_sum_pos - 0.5 * double(n_pos) * double(n_pos + 1)) /
           (double(n_pos) * double(n_neg));
}

} // namespace riskgrid

#endif

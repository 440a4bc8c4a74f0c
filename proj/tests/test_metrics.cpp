#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "riskgrid/metrics.hpp"
#include "riskgrid/rng.hpp"
#include "report_fixtures.hpp"

using namespace riskgrid;
using riskgrid::testing::reference_report_rows;

namespace {

// All-pairs Mann-Whitney oracle, O(n^2).
double auc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs++;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / double(pairs);
}

// Build a labeled sample realizing a published precision/recall/support row
// for class 0 against a filler class 1.
void realize_row(double precision, double recall, std::size_t support,
                 std::vector<int>& truth, std::vector<int>& pred) {
    auto tp = static_cast<std::size_t>(std::llround(recall * double(support)));
    auto predicted = static_cast<std::size_t>(std::llround(double(tp) / precision));
    std::size_t fn = support - tp;
    std::size_t fp = predicted - tp;
    truth.clear();
    pred.clear();
    for (std::size_t i = 0; i < tp; ++i) { truth.push_back(0); pred.push_back(0); }
    for (std::size_t i = 0; i < fn; ++i) { truth.push_back(0); pred.push_back(1); }
    for (std::size_t i = 0; i < fp; ++i) { truth.push_back(1); pred.push_back(0); }
    for (std::size_t i = 0; i < 50; ++i) { truth.push_back(1); pred.push_back(1); }
}

} // namespace

TEST_CASE("f1 follows from each published precision/recall pair") {
    for (const auto& row : reference_report_rows()) {
        double f1 = 100.0 * f1_score(row.precision_pct / 100.0, row.recall_pct / 100.0);
        CHECK(std::fabs(f1 - row.f1_pct) <= 0.01); // percentage points
    }
}

TEST_CASE("report reproduces published rows from realized count data") {
    for (const auto& row : reference_report_rows()) {
        CAPTURE(row.model);
        CAPTURE(row.state);
        std::vector<int> truth, pred;
        realize_row(row.precision_pct / 100.0, row.recall_pct / 100.0, row.support, truth, pred);
        auto rep = report(truth, pred);
        CHECK(rep.per_class[0].support == row.support);
        CHECK(std::fabs(100.0 * rep.per_class[0].precision - row.precision_pct) <= 0.01);
        CHECK(std::fabs(100.0 * rep.per_class[0].recall - row.recall_pct) <= 0.01);
        CHECK(std::fabs(100.0 * rep.per_class[0].f1 - row.f1_pct) <= 0.01);
    }
}

TEST_CASE("report basics") {
    SUBCASE("perfect predictions") {
        std::vector<int> y = {0, 1, 2, 3, 0, 1, 2, 3};
        auto rep = report(y, y);
        CHECK(rep.accuracy == 1.0);
        CHECK(rep.mean_recall == 1.0);
        for (auto& c : rep.per_class) {
            CHECK(c.precision == 1.0);
            CHECK(c.recall == 1.0);
            CHECK(c.f1 == 1.0);
        }
    }
    SUBCASE("direct count case: TP=3 FN=1 FP=0") {
        std::vector<int> truth = {0, 0, 0, 0, 1, 1};
        std::vector<int> pred = {0, 0, 0, 1, 1, 1};
        auto rep = report(truth, pred);
        CHECK(rep.per_class[0].recall == doctest::Approx(0.75).epsilon(1e-15));
        CHECK(rep.per_class[0].precision == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(rep.per_class[0].f1 == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
    }
    SUBCASE("class absent from predictions gets precision 0 and a flag") {
        std::vector<int> truth = {0, 1, 2, 3};
        std::vector<int> pred = {0, 1, 2, 0}; // class 3 never predicted
        auto rep = report(truth, pred);
        CHECK(rep.per_class[3].precision == 0.0);
        CHECK(rep.per_class[3].f1 == 0.0);
        CHECK(rep.per_class[3].never_predicted);
        CHECK_FALSE(rep.per_class[0].never_predicted);
    }
}

TEST_CASE("report is order invariant and mean recall is the macro mean") {
    auto rng = make_rng(7, "report_perm");
    std::vector<int> truth, pred;
    for (int i = 0; i < 400; ++i) {
        truth.push_back(int(rng() % 4));
        pred.push_back(int(rng() % 4));
    }
    auto rep = report(truth, pred);

    double mean = (rep.per_class[0].recall + rep.per_class[1].recall + rep.per_class[2].recall +
                   rep.per_class[3].recall) /
                  4.0;
    CHECK(std::fabs(rep.mean_recall - mean) <= 1e-12);

    std::vector<std::size_t> order(truth.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_vec(order, rng);
    std::vector<int> truth2, pred2;
    for (std::size_t i : order) {
        truth2.push_back(truth[i]);
        pred2.push_back(pred[i]);
    }
    auto rep2 = report(truth2, pred2);
    CHECK(rep2.accuracy == rep.accuracy);
    for (int c = 0; c < kNumStates; ++c) {
        CHECK(rep2.per_class[c].precision == rep.per_class[c].precision);
        CHECK(rep2.per_class[c].recall == rep.per_class[c].recall);
    }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
    CHECK(argmax_class({0.3, 0.3, 0.2, 0.2}) == 0);
    CHECK(argmax_class({0.1, 0.4, 0.4, 0.1}) == 1);
    CHECK(argmax_class({0, 0, 0, 0}) == 0);
}

TEST_CASE("auc examples") {
    CHECK(auc({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(auc({0.9, 0.4, 0.6, 0.1}, {1, 1, 0, 0}) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), data_error);
}

TEST_CASE("auc equals the all-pairs oracle exactly on 500 random instances") {
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        auto rng = make_rng(seed, "auc_prop");
        std::size_t n = 2 + rng() % 199;
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantized scores so ties actually occur
            scores[i] = double(rng() % 20) / 10.0;
            labels[i] = int(rng() % 2);
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos) labels[0] = 1;
        if (!has_neg) labels[n - 1] = 0;
        CHECK(auc(scores, labels) == auc_bruteforce(scores, labels));
    }
}

TEST_CASE("auc is invariant under strictly monotone transforms") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto rng = make_rng(seed, "auc_mono");
        std::size_t n = 10 + rng() % 50;
        std::vector<double> scores(n), warped(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = normal01(rng);
            warped[i] = std::exp(3.0 * scores[i]) + 2.0; // strictly increasing
            labels[i] = int(rng() % 2);
        }
        labels[0] = 1;
        labels[n - 1] = 0;
        CHECK(auc(scores, labels) == doctest::Approx(auc(warped, labels)).epsilon(1e-12));
    }
}

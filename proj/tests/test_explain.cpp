#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "riskgrid/explain.hpp"
#include "riskgrid/models.hpp"
#include "riskgrid/rng.hpp"

using namespace riskgrid;

namespace {

ValueFunction lambda_vf(std::function<double(const std::vector<double>&)> f,
                        std::vector<double> baseline) {
    ValueFunction vf;
    vf.baseline = std::move(baseline);
    vf.eval = [f = std::move(f)](const Tensor& X) {
        std::vector<double> out(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) {
            std::vector<double> row(X.cols());
            for (std::size_t j = 0; j < X.cols(); ++j) row[j] = X.at(i, j);
            out[i] = f(row);
        }
        return out;
    };
    return vf;
}

// QIDNN stripped to its interaction component: logits_c = (c+1) * x0 * x1.
QidnnModel product_model() {
    QISpec qi;
    qi.selected = {0, 1};
    qi.latent_len = 1;
    QidnnModel m(BaseDNNSpec{6, 4, 8, 4}, qi, 0);
    for (Param* p : m.params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    m.V.value.at(0, 0) = 1.0;
    m.V.value.at(1, 0) = 1.0;
    for (std::size_t c = 0; c < 4; ++c) m.wf.value.at(4, c) = double(c + 1);
    return m;
}

// BaseDNN wired as an exactly linear map: logits_c = sum_k a[k][c] x_k,
// via paired relu(x) - relu(-x) units.
BaseDnnModel linear_model(const std::vector<std::array<double, 4>>& coef) {
    std::size_t d = coef.size();
    BaseDnnModel m(BaseDNNSpec{d, 2 * d, 8, 4}, 0);
    REQUIRE(2 * d <= 8);
    for (Param* p : m.params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        m.w1.value.at(k, 2 * k) = 1.0;
        m.w1.value.at(k, 2 * k + 1) = -1.0;
    }
    for (std::size_t h = 0; h < 2 * d; ++h) m.w2.value.at(h, h) = 1.0;
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t c = 0; c < 4; ++c) {
            m.w3.value.at(2 * k, c) = coef[k][c];
            m.w3.value.at(2 * k + 1, c) = -coef[k][c];
        }
    return m;
}

} // namespace

TEST_CASE("enumeration recovers an additive model exactly") {
    auto vf = lambda_vf([](const std::vector<double>& x) { return x[0] + 2.0 * x[1]; },
                        {0.0, 0.0});
    auto exp = shapley_exact(vf, {1.0, 1.0});
    CHECK(exp.base_value == 0.0);
    CHECK(exp.prediction == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(exp.phi[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(exp.phi[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("dummy axiom: an ignored feature earns zero attribution") {
    auto vf = lambda_vf([](const std::vector<double>& x) { return 3.0 * x[0]; }, {0.0, 0.5});
    auto exp = shapley_exact(vf, {2.0, 9.0});
    CHECK(exp.phi[1] == 0.0);
    CHECK(exp.phi[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("symmetry axiom: exchangeable features share the attribution") {
    auto vf = lambda_vf(
        [](const std::vector<double>& x) { return x[0] * x[1] + x[0] + x[1] + 0.3 * x[2]; },
        {0.0, 0.0, 0.0});
    auto exp = shapley_exact(vf, {1.7, 1.7, 0.4});
    CHECK(exp.phi[0] == doctest::Approx(exp.phi[1]).epsilon(1e-12));
}

TEST_CASE("linearity axiom: attribution of a*f + b*g is the combination") {
    std::vector<double> baseline = {0.2, -0.1, 0.5, 0.0};
    std::vector<double> x = {1.0, 0.7, -0.9, 2.0};
    auto f = [](const std::vector<double>& v) {
        return v[0] * v[1] + std::sin(v[2]) + 0.5 * v[3];
    };
    auto g = [](const std::vector<double>& v) {
        return std::exp(0.3 * v[0]) + v[2] * v[3] - v[1];
    };
    double a = 1.7, b = -2.3;
    auto combo = [&](const std::vector<double>& v) { return a * f(v) + b * g(v); };
    auto ef = shapley_exact(lambda_vf(f, baseline), x);
    auto eg = shapley_exact(lambda_vf(g, baseline), x);
    auto ec = shapley_exact(lambda_vf(combo, baseline), x);
    for (std::size_t j = 0; j < x.size(); ++j)
        CHECK(ec.phi[j] == doctest::Approx(a * ef.phi[j] + b * eg.phi[j]).epsilon(1e-9));
}

TEST_CASE("additivity holds to 1e-9 for enumeration and sampling") {
    auto rng = make_rng(17, "expl_add");
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> baseline(8), x(8);
        for (auto& v : baseline) v = 0.3 * normal01(rng);
        for (auto& v : x) v = normal01(rng);
        auto fn = [](const std::vector<double>& v) {
            double s = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) s += (double(i % 3) - 1.0) * v[i];
            return std::tanh(s) + v[0] * v[3] - 0.4 * v[5] * v[6] * v[7];
        };
        auto vf = lambda_vf(fn, baseline);
        auto exact = shapley_exact(vf, x);
        CHECK(std::fabs(exact.additivity_gap()) <= 1e-9);
        auto sampled = shapley_sampled(vf, x, 64, std::uint64_t(rep));
        CHECK(std::fabs(sampled.additivity_gap()) <= 1e-9);
    }
}

TEST_CASE("enumeration refuses wide inputs and points at the sampler") {
    auto vf = lambda_vf([](const std::vector<double>& x) { return x[0]; },
                        std::vector<double>(13, 0.0));
    try {
        shapley_exact(vf, std::vector<double>(13, 1.0));
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("sampling") != std::string::npos);
    }
}

TEST_CASE("sampling matches enumeration on additive models regardless of budget") {
    std::vector<double> baseline = {0.0, 1.0, -2.0, 0.5, 0.0, 3.0};
    std::vector<double> x = {1.0, -1.0, 4.0, 0.5, 2.0, -3.0};
    auto fn = [](const std::vector<double>& v) {
        double s = 1.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += double(i + 1) * v[i];
        return s;
    };
    auto vf = lambda_vf(fn, baseline);
    auto exact = shapley_exact(vf, x);
    for (std::size_t budget : {2ul, 8ul, 32ul}) {
        auto sampled = shapley_sampled(vf, x, budget, 5);
        for (std::size_t j = 0; j < x.size(); ++j)
            CHECK(sampled.phi[j] == doctest::Approx(exact.phi[j]).epsilon(1e-9));
    }
}

TEST_CASE("256 antithetic permutations land within 5% of enumeration") {
    auto rng = make_rng(23, "expl_nl");
    std::vector<double> baseline(8, 0.0), x(8);
    for (auto& v : x) v = 0.5 + 0.5 * normal01(rng);
    auto fn = [](const std::vector<double>& v) {
        return v[0] * v[1] + std::tanh(v[2] + v[3]) * v[4] + std::exp(0.2 * v[5]) +
               0.7 * v[6] * v[7] * v[0];
    };
    auto vf = lambda_vf(fn, baseline);
    auto exact = shapley_exact(vf, x);
    auto sampled = shapley_sampled(vf, x, 256, 7);
    double mean_exact = 0.0, mean_sampled = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        mean_exact += std::fabs(exact.phi[j]);
        mean_sampled += std::fabs(sampled.phi[j]);
    }
    CHECK(std::fabs(mean_sampled - mean_exact) <= 0.05 * mean_exact);
}

TEST_CASE("sampling preconditions and determinism") {
    auto vf = lambda_vf([](const std::vector<double>& x) { return x[0] * x[1]; }, {0.0, 0.0});
    CHECK_THROWS_AS(shapley_sampled(vf, {1, 1}, 3, 0), config_error);
    CHECK_THROWS_AS(shapley_sampled(vf, {1, 1}, 0, 0), config_error);
    auto a = shapley_sampled(vf, {1.0, 2.0}, 16, 42);
    auto b = shapley_sampled(vf, {1.0, 2.0}, 16, 42);
    CHECK(a.phi == b.phi);
}

TEST_CASE("linear model class explanations recover weight times offset") {
    std::vector<std::array<double, 4>> coef = {{0.5, -1.0, 2.0, 0.0},
                                               {1.5, 0.3, -0.7, 1.0},
                                               {-0.4, 0.8, 0.1, -2.0}};
    auto m = linear_model(coef);
    std::vector<double> baseline = {0.3, -0.5, 1.0};
    std::vector<double> x = {1.2, 0.4, -0.6};
    for (int c = 0; c < 4; ++c) {
        auto vf = class_logit_value_fn(m, c, baseline);
        auto exp = shapley_exact(vf, x);
        for (std::size_t k = 0; k < x.size(); ++k)
            CHECK(exp.phi[k] ==
                  doctest::Approx(coef[k][c] * (x[k] - baseline[k])).epsilon(1e-9));
    }
}

TEST_CASE("state explainers come out one per state") {
    auto m = product_model();
    std::vector<double> baseline(6, 0.0);
    auto exps = explain_states(m, {1.0, 2.0, 0.3, 0.0, 0.0, 0.0}, baseline);
    REQUIRE(exps.size() == 4);
    CHECK(exps[0].target == "low");
    CHECK(exps[3].target == "attack");
    // logits_c = (c+1) x0 x1 -> attack attribution is 4x the low one
    CHECK(exps[3].phi[0] == doctest::Approx(4.0 * exps[0].phi[0]).epsilon(1e-9));
}

TEST_CASE("importance flags planted drivers and zeroes constant features") {
    auto m = product_model();
    auto rng = make_rng(31, "imp");
    Tensor X = Tensor::zeros(24, 6);
    std::vector<double> baseline(6, 0.0);
    baseline[5] = 0.7;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        for (std::size_t j = 0; j < 5; ++j) X.at(i, j) = 1.0 + 0.3 * normal01(rng);
        X.at(i, 5) = 0.7; // pinned to the baseline: a dummy feature
    }
    auto entries = importance(m, X, baseline);
    CHECK(((entries[0].feature == 0 && entries[1].feature == 1) ||
           (entries[0].feature == 1 && entries[1].feature == 0)));
    CHECK(entries[0].overall > 0.0);
    for (const auto& e : entries)
        if (e.feature == 5) {
            CHECK(e.overall == 0.0);
            CHECK(e.feature == entries.back().feature); // last rank
        }
}

TEST_CASE("interaction screening") {
    auto m = product_model();
    auto rng = make_rng(37, "screen");
    Tensor X = Tensor::zeros(16, 6);
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < 6; ++j) X.at(i, j) = 1.0 + 0.25 * normal01(rng);
    std::vector<double> baseline(6, 0.0);

    SUBCASE("planted product pair ranks first under enumeration") {
        auto ranked = interaction_screen(m, X, baseline, 3);
        CHECK(ranked[0].features == std::make_pair(std::size_t(0), std::size_t(1)));
        CHECK(ranked[0].score > 10.0 * ranked[1].score);
    }
    SUBCASE("planted product pair ranks first under subset sampling") {
        ExplainOptions opts;
        opts.exact_limit = 2; // force the sampled path on six features
        opts.screen_draws = 16;
        opts.seed = 5;
        auto ranked = interaction_screen(m, X, baseline, 3, opts);
        CHECK(ranked[0].features == std::make_pair(std::size_t(0), std::size_t(1)));
    }
    SUBCASE("an additive model screens to zero everywhere") {
        std::vector<std::array<double, 4>> coef = {{0.5, -1.0, 2.0, 0.0},
                                                   {1.5, 0.3, -0.7, 1.0},
                                                   {-0.4, 0.8, 0.1, -2.0}};
        auto lin = linear_model(coef);
        Tensor Xs = Tensor::zeros(8, 3);
        for (std::size_t i = 0; i < Xs.rows(); ++i)
            for (std::size_t j = 0; j < 3; ++j) Xs.at(i, j) = normal01(rng);
        auto ranked = interaction_screen(lin, Xs, {0.0, 0.0, 0.0}, 3);
        for (const auto& r : ranked) CHECK(std::fabs(r.score) <= 1e-9);
    }
    SUBCASE("asking for more pairs than exist is an argument error") {
        CHECK_THROWS_AS(interaction_screen(m, X, baseline, 16), config_error);
    }
    SUBCASE("union of ranked pairs keeps rank order and uniqueness") {
        std::vector<PairScore> ranked = {{{2, 4}, 3.0}, {{2, 5}, 2.0}, {{1, 4}, 1.0}};
        auto sel = pair_feature_union(ranked);
        CHECK(sel == std::vector<std::size_t>{2, 4, 5, 1});
    }
}

TEST_CASE("force records") {
    SUBCASE("zero attribution gives an empty force list") {
        Explanation e;
        e.base_value = 0.4;
        e.prediction = 0.4;
        e.phi = {0.0, 0.0, 0.0};
        auto fd = force_data(e, {1.0, 2.0, 3.0});
        CHECK(fd.entries.empty());
        CHECK(fd.prediction == fd.base_value);
    }
    SUBCASE("entries sort by magnitude with push/pull tags") {
        Explanation e;
        e.base_value = 0.2;
        e.prediction = 0.4;
        e.phi = {0.3, -0.1};
        auto fd = force_data(e, {1.0, 0.0});
        REQUIRE(fd.entries.size() == 2);
        CHECK(fd.entries[0].phi == 0.3);
        CHECK(fd.entries[0].increases);
        CHECK(fd.entries[1].phi == -0.1);
        CHECK_FALSE(fd.entries[1].increases);
        CHECK(fd.prediction == doctest::Approx(0.4).epsilon(1e-12));
    }
}

TEST_CASE("force text lists contributions strongest first") {
    Explanation e;
    e.target = "high";
    e.base_value = 0.2;
    e.prediction = 0.4;
    e.phi = {0.3, -0.1, 0.0};
    auto fd = force_data(e, {160.0, 1.0, 5.0});
    auto text = force_text(fd, [](std::size_t f) { return "f" + std::to_string(f); });
    CHECK(text.find("high: base 0.2 -> prediction 0.4") == 0);
    CHECK(text.find("+0.3 f0=160 (push)") != std::string::npos);
    CHECK(text.find("-0.1 f1=1 (pull)") != std::string::npos);
    CHECK(text.find("f2") == std::string::npos);
    CHECK(text.find("f0") < text.find("f1"));
}

TEST_CASE("importance is independent of the worker count") {
    auto m = product_model();
    auto rng = make_rng(47, "threads");
    Tensor X = Tensor::zeros(12, 6);
    for (double& v : X.data) v = normal01(rng);
    std::vector<double> baseline(6, 0.0);

    setenv("RISKGRID_THREADS", "1", 1);
    auto one = importance(m, X, baseline);
    setenv("RISKGRID_THREADS", "3", 1);
    auto three = importance(m, X, baseline);
    unsetenv("RISKGRID_THREADS");
    REQUIRE(one.size() == three.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].feature == three[i].feature);
        CHECK(one[i].overall == three[i].overall);
        for (int c = 0; c < 4; ++c) CHECK(one[i].per_state[c] == three[i].per_state[c]);
    }
}

TEST_CASE("transition tendency threshold rule") {
    auto confident = transition_tendency({0.0, 0.0, 3.6051, 0.0});
    CHECK(confident.top_state == 2);
    CHECK_FALSE(confident.toward.has_value());

    auto drifting = transition_tendency({0.0, 0.0, 0.40, 0.21});
    CHECK(drifting.top_state == 2);
    REQUIRE(drifting.toward.has_value());
    CHECK(*drifting.toward == 3);
    CHECK(drifting.ratio == doctest::Approx(0.525).epsilon(1e-12));

    auto below = transition_tendency({0.0, 0.0, 0.40, 0.19});
    CHECK_FALSE(below.toward.has_value());
}

TEST_CASE("dependence triples carry value, attribution and companion") {
    auto m = product_model();
    Tensor X = Tensor::zeros(6, 6);
    auto rng = make_rng(41, "dep");
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < 6; ++j) X.at(i, j) = normal01(rng);
    auto triples = dependence_triples(m, X, std::vector<double>(6, 0.0), 0, 1, 2);
    REQUIRE(triples.size() == 6);
    for (std::size_t i = 0; i < triples.size(); ++i) {
        CHECK(triples[i].value == X.at(i, 0));
        CHECK(triples[i].companion_value == X.at(i, 1));
    }
}

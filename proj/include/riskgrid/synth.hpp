#ifndef RISKGRID_SYNTH_HPP
#define RISKGRID_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "riskgrid/dataset.hpp"
#include "riskgrid/errors.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/schema.hpp"

namespace riskgrid {

// Synthetic cohort with a planted scoring rule: five weighted linear drivers
// plus optional pairwise products, thresholded into the four risk states at
// the exact class-ratio quantiles. Label noise permutes labels among a
// random subset, which keeps class counts intact.
struct SynthConfig {
    std::size_t n = 20531;
    std::array<double, 4> class_ratios = {7221.0, 5868.0, 5475.0, 1967.0};
    double interaction_strength = 2.0;
    double noise = 0.05;
    std::uint64_t seed = 7;

    std::vector<std::size_t> causal_features;                       // 5 linear drivers
    std::vector<double> causal_weights = {1.0, 0.9, 0.8, 0.7, 0.6};
    std::vector<std::pair<std::size_t, std::size_t>> interaction_pairs;
    std::vector<double> pair_weights = {0.9, 0.75, 0.6};

    // Optional high-tail driver that pushes samples toward the attack band.
    std::size_t attack_driver = static_cast<std::size_t>(-1);
    double attack_strength = 0.0;
};

inline SynthConfig default_synth_config(const FeatureSchema& schema) {
    SynthConfig cfg;
    cfg.causal_features = {schema.index_of("LSBP"), schema.index_of("Exs"),
                           schema.index_of("Sm"), schema.index_of("Wt"),
                           schema.index_of("TC")};
    cfg.interaction_pairs = {{schema.index_of("LSBP"), schema.index_of("Exs")},
                             {schema.index_of("Sm"), schema.index_of("LDBP")},
                             {schema.index_of("HbA1c"), schema.index_of("HS")}};
    cfg.attack_driver = schema.index_of("HbA1c");
    return cfg;
}

// Largest-remainder apportionment of n among the ratio weights.
inline std::array<std::size_t, 4> apportion_counts(const std::array<double, 4>& ratios,
                                                   std::size_t n) {
    double total = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw config_error("synth: class ratios must be positive");
        total += r;
    }
    std::array<std::size_t, 4> counts{};
    std::array<double, 4> frac{};
    std::size_t assigned = 0;
    for (int c = 0; c < 4; ++c) {
        double q = double(n) * ratios[c] / total;
        counts[c] = static_cast<std::size_t>(std::floor(q));
        frac[c] = q - std::floor(q);
        assigned += counts[c];
    }
    while (assigned < n) {
        int best = 0;
        for (int c = 1; c < 4; ++c)
            if (frac[c] > frac[best]) best = c;
        counts[best]++;
        frac[best] = -1.0;
        assigned++;
    }
    return counts;
}

class SynthGenerator {
public:
    SynthGenerator(FeatureSchema schema, SynthConfig cfg)
        : schema_(std::move(schema)), cfg_(std::move(cfg)) {
        if (cfg_.n < 40) throw config_error("synth: n must be at least 40");
        if (!(cfg_.noise >= 0.0 && cfg_.noise <= 1.0))
            throw config_error("synth: noise must be in [0,1]");
        if (cfg_.causal_features.size() != cfg_.causal_weights.size())
            throw config_error("synth: causal feature/weight lengths differ");
        if (cfg_.interaction_pairs.size() > cfg_.pair_weights.size())
            throw config_error("synth: more interaction pairs than weights");
        for (double r : cfg_.class_ratios)
            if (!(r > 0.0)) throw config_error("synth: class ratios must be positive");
        build_feature_gens();
    }

    const SynthConfig& config() const { return cfg_; }

    // Standardized value of a raw draw under the generating distribution.
    double zvalue(std::size_t feature, double raw) const {
        const Gen& g = gens_[feature];
        return (raw - g.mean) / g.sd;
    }

    // The planted rule, computable from any complete raw feature vector.
    double planted_score(const std::vector<double>& raw) const {
        double s = 0.0;
        for (std::size_t t = 0; t < cfg_.causal_features.size(); ++t)
            s += cfg_.causal_weights[t] * zvalue(cfg_.causal_features[t],
                                                 raw[cfg_.causal_features[t]]);
        for (std::size_t t = 0; t < cfg_.interaction_pairs.size(); ++t) {
            auto [a, b] = cfg_.interaction_pairs[t];
            s += cfg_.interaction_strength * cfg_.pair_weights[t] * zvalue(a, raw[a]) *
                 zvalue(b, raw[b]);
        }
        if (cfg_.attack_strength != 0.0 && cfg_.attack_driver < schema_.size()) {
            double z = zvalue(cfg_.attack_driver, raw[cfg_.attack_driver]);
            s += cfg_.attack_strength * std::max(0.0, z - 1.0);
        }
        return s;
    }

    Dataset generate() const {
        auto rng = make_rng(cfg_.seed, "synth");
        std::vector<std::vector<double>> raw(cfg_.n, std::vector<double>(schema_.size()));
        for (std::size_t i = 0; i < cfg_.n; ++i)
            for (std::size_t j = 0; j < schema_.size(); ++j) raw[i][j] = draw(j, rng);

        // rank samples by planted score; class bands at the ratio quantiles
        std::vector<double> score(cfg_.n);
        for (std::size_t i = 0; i < cfg_.n; ++i) score[i] = planted_score(raw[i]);
        std::vector<std::size_t> order(cfg_.n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] < score[b];
            return a < b;
        });
        auto counts = apportion_counts(cfg_.class_ratios, cfg_.n);
        std::vector<int> label(cfg_.n);
        std::size_t pos = 0;
        for (int c = 0; c < 4; ++c)
            for (std::size_t k = 0; k < counts[c]; ++k) label[order[pos++]] = c;

        // count-preserving label noise: rotate labels among a random subset
        auto n_noisy = static_cast<std::size_t>(std::llround(cfg_.noise * double(cfg_.n)));
        if (n_noisy > 1) {
            auto noise_rng = make_rng(cfg_.seed, "synth_noise");
            std::vector<std::size_t> all(cfg_.n);
            std::iota(all.begin(), all.end(), 0);
            shuffle_vec(all, noise_rng);
            all.resize(n_noisy);
            int first = label[all[0]];
            for (std::size_t k = 0; k + 1 < n_noisy; ++k) label[all[k]] = label[all[k + 1]];
            label[all[n_noisy - 1]] = first;
        }

        Dataset ds;
        ds.schema = schema_;
        ds.samples.resize(cfg_.n);
        std::size_t sm_idx = schema_.index_of("Sm");
        std::size_t ys_idx = schema_.index_of("Ys");
        for (std::size_t i = 0; i < cfg_.n; ++i) {
            Sample& s = ds.samples[i];
            s.risk_state = label[i];
            s.features.resize(schema_.size());
            for (std::size_t j = 0; j < schema_.size(); ++j) s.features[j] = raw[i][j];
            // years-of-smoking is null for nonsmokers
            if (raw[i][sm_idx] == 0.0) s.features[ys_idx] = std::nullopt;
        }
        return ds;
    }

private:
    enum class Dist { normal, bernoulli, categorical };

    struct Gen {
        Dist dist = Dist::normal;
        double mean = 0.0;
        double sd = 1.0;
        double p = 0.0;                  // bernoulli
        std::vector<int> values;         // categorical
        std::vector<double> cum;         // categorical cumulative probs
        bool clamp_nonneg = false;
    };

    void build_feature_gens() {
        gens_.resize(schema_.size());
        for (std::size_t j = 0; j < schema_.size(); ++j) {
            const FeatureDef& f = schema_[j];
            Gen g;
            if (f.kind == FeatureKind::binary) {
                g.dist = Dist::bernoulli;
                g.p = binary_rate(f.abbrev);
                g.mean = g.p;
                g.sd = std::sqrt(g.p * (1.0 - g.p));
            } else if (f.kind == FeatureKind::categorical) {
                g.dist = Dist::categorical;
                g.values = f.categories;
                std::vector<double> probs = category_probs(f.abbrev, f.categories.size());
                double acc = 0.0, m = 0.0, m2 = 0.0;
                for (std::size_t k = 0; k < probs.size(); ++k) {
                    acc += probs[k];
                    g.cum.push_back(acc);
                    m += probs[k] * g.values[k];
                    m2 += probs[k] * g.values[k] * g.values[k];
                }
                g.mean = m;
                g.sd = std::sqrt(std::max(1e-12, m2 - m * m));
            } else if (f.normal_range) {
                g.mean = 0.5 * (f.normal_range->lo + f.normal_range->hi);
                g.sd = 0.5 * (f.normal_range->hi - f.normal_range->lo);
            } else if (f.abbrev == "FA") {
                g.mean = 55.0;
                g.sd = 15.0;
            } else if (f.abbrev == "Wt") {
                g.mean = 70.0;
                g.sd = 15.0;
            } else if (f.abbrev == "Ys") {
                g.mean = 18.0;
                g.sd = 9.0;
                g.clamp_nonneg = true;
            } // fillers stay standard normal
            gens_[j] = std::move(g);
        }
    }

    static double binary_rate(const std::string& abbrev) {
        if (abbrev == "Exs") return 0.45;
        if (abbrev == "HEH") return 0.35;
        if (abbrev == "HS") return 0.15;
        if (abbrev == "Arhm") return 0.08;
        if (abbrev == "Ret") return 0.40;
        return 0.30;
    }

    static std::vector<double> category_probs(const std::string& abbrev, std::size_t k) {
        if (abbrev == "Sm") return {0.55, 0.15, 0.30};
        if (abbrev == "MV") return {0.50, 0.30, 0.20};
        return std::vector<double>(k, 1.0 / double(k));
    }

    double draw(std::size_t j, std::mt19937_64& rng) const {
        const Gen& g = gens_[j];
        switch (g.dist) {
        case Dist::bernoulli:
            return uniform01(rng) < g.p ? 1.0 : 0.0;
        case Dist::categorical: {
            double u = uniform01(rng);
            for (std::size_t k = 0; k < g.cum.size(); ++k)
                if (u <= g.cum[k]) return double(g.values[k]);
            return double(g.values.back());
        }
        case Dist::normal:
        default: {
            double v = g.mean + g.sd * normal01(rng);
            return g.clamp_nonneg ? std::max(0.0, v) : v;
        }
        }
    }

    FeatureSchema schema_;
    SynthConfig cfg_;
    std::vector<Gen> gens_;
};

inline Dataset synth(const FeatureSchema& schema, const SynthConfig& cfg) {
    return SynthGenerator(schema, cfg).generate();
}

} // namespace riskgrid

#endif

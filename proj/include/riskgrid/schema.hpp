#ifndef RISKGRID_SCHEMA_HPP
#define RISKGRID_SCHEMA_HPP

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "riskgrid/errors.hpp"

namespace riskgrid {

enum class FeatureKind { continuous, categorical, binary };

struct NormalRange {
    double lo = 0.0;
    double hi = 0.0;
    std::string unit;
};

struct FeatureDef {
    std::string abbrev;
    FeatureKind kind = FeatureKind::continuous;
    std::optional<NormalRange> normal_range;    // continuous only
    std::vector<int> categories;                // categorical only

    static FeatureDef cont(std::string a) {
        return FeatureDef{std::move(a), FeatureKind::continuous, std::nullopt, {}};
    }
    static FeatureDef cont(std::string a, double lo, double hi, std::string unit) {
        return FeatureDef{std::move(a), FeatureKind::continuous,
                          NormalRange{lo, hi, std::move(unit)}, {}};
    }
    static FeatureDef cat(std::string a, std::vector<int> cats) {
        return FeatureDef{std::move(a), FeatureKind::categorical, std::nullopt, std::move(cats)};
    }
    static FeatureDef bin(std::string a) {
        return FeatureDef{std::move(a), FeatureKind::binary, std::nullopt, {0, 1}};
    }
};

// Ordered feature dictionary. The stock risk schema has exactly 34 entries:
// 22 named clinical/lifestyle features plus 12 neutral filler columns.
struct FeatureSchema {
    std::vector<FeatureDef> features;

    std::size_t size() const { return features.size(); }
    const FeatureDef& operator[](std::size_t i) const { return features[i]; }

    std::size_t index_of(const std::string& abbrev) const {
        for (std::size_t i = 0; i < features.size(); ++i)
            if (features[i].abbrev == abbrev) return i;
        throw config_error("schema: no feature named '" + abbrev + "'");
    }

    void validate() const {
        for (std::size_t i = 0; i < features.size(); ++i) {
            for (std::size_t j = i + 1; j < features.size(); ++j)
                if (features[i].abbrev == features[j].abbrev)
                    throw config_error("schema: duplicate abbreviation '" + features[i].abbrev +
                                       "'");
            if (features[i].normal_range && features[i].kind != FeatureKind::continuous)
                throw config_error("schema: normal range on non-continuous feature '" +
                                   features[i].abbrev + "'");
        }
    }

    // FNV-1a over a canonical serialization; checkpoints carry this to catch
    // schema drift between training and evaluation data.
    std::uint64_t fingerprint() const {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](const std::string& s) {
            for (char c : s) {
                h ^= static_cast<unsigned char>(c);
                h *= 1099511628211ULL;
            }
        };
        for (const auto& f : features) {
            mix(f.abbrev);
            mix("|");
            mix(std::to_string(static_cast<int>(f.kind)));
            if (f.normal_range) {
                mix("|");
                mix(std::to_string(f.normal_range->lo));
                mix(":");
                mix(std::to_string(f.normal_range->hi));
            }
            for (int c : f.categories) {
                mix(",");
                mix(std::to_string(c));
            }
            mix(";");
        }
        return h;
    }
};

// The default 34-column dictionary: clinical ranges follow the usual adult
// reference intervals; 12 filler columns pad the survey width.
inline FeatureSchema default_schema() {
    FeatureSchema s;
    auto& f = s.features;
    f.push_back(FeatureDef::bin("Arhm"));                                // arrhythmia
    f.push_back(FeatureDef::cont("BMI", 20.0, 25.0, "kg/m2"));
    f.push_back(FeatureDef::cat("Edu", {1, 2, 3, 4, 5}));                // education level
    f.push_back(FeatureDef::bin("Exs"));                                 // lack of exercise
    f.push_back(FeatureDef::cont("FA"));                                 // filling age
    f.push_back(FeatureDef::cont("FBG", 3.9, 6.1, "mmol/L"));            // fasting glucose
    f.push_back(FeatureDef::cont("HbA1c", 4.0, 6.0, "%"));
    f.push_back(FeatureDef::cont("Hcy", 5.0, 15.0, "umol/L"));           // homocysteine
    f.push_back(FeatureDef::cont("HDL-C", 1.16, 1.55, "mmol/L"));
    f.push_back(FeatureDef::bin("HEH"));                                 // hypertension history
    f.push_back(FeatureDef::bin("HS"));                                  // stroke history
    f.push_back(FeatureDef::cont("Wt"));                                 // weight
    f.push_back(FeatureDef::cont("LDBP", 60.0, 89.0, "mmHg"));
    f.push_back(FeatureDef::cont("LDL-C", 0.0, 3.37, "mmol/L"));
    f.push_back(FeatureDef::cont("LSBP", 80.0, 140.0, "mmHg"));
    f.push_back(FeatureDef::cat("MV", {1, 2, 3}));                       // meat/vegetable diet
    f.push_back(FeatureDef::bin("Ret"));                                 // retired
    f.push_back(FeatureDef::cat("Sm", {0, 1, 2}));                       // smoking status
    f.push_back(FeatureDef::cont("TC", 3.0, 5.2, "mmol/L"));             // total cholesterol
    f.push_back(FeatureDef::cont("TG", 0.6, 1.7, "mmol/L"));             // triglyceride
    f.push_back(FeatureDef::cont("Ys"));                                 // years smoking
    f.push_back(FeatureDef::cont("RSBP", 80.0, 140.0, "mmHg"));          // right systolic BP
    for (int i = 1; i <= 12; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "F%02d", i);
        f.push_back(FeatureDef::cont(buf));
    }
    s.validate();
    return s;
}

} // namespace riskgrid

#endif

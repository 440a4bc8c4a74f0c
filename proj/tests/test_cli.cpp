#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "json.hpp"

#ifndef RISKGRID_CLI_PATH
#error "RISKGRID_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string cli = RISKGRID_CLI_PATH;

struct Workdir {
    fs::path dir;
    Workdir() {
        dir = fs::temp_directory_path() / ("riskgrid_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workdir() { fs::remove_all(dir); }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
    int rc = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json slurp_json(const std::string& path) { return json::parse(slurp(path)); }

void write_quick_config(const std::string& path) {
    std::ofstream out(path);
    out << "{\"learning_rate\":0.003,\"max_epochs\":25,\"batch_size\":32,\"patience\":25}\n";
}

} // namespace

TEST_CASE("synth command") {
    Workdir wd;
    SUBCASE("same seed twice writes identical files") {
        REQUIRE(run("synth --out " + (wd / "a.csv") + " --n 400 --seed 7") == 0);
        REQUIRE(run("synth --out " + (wd / "b.csv") + " --n 400 --seed 7") == 0);
        CHECK(slurp(wd / "a.csv") == slurp(wd / "b.csv"));
    }
    SUBCASE("noise outside [0,1] is a usage error") {
        CHECK(run("synth --out " + (wd / "x.csv") + " --noise 1.5") == 2);
        CHECK_FALSE(fs::exists(wd / "x.csv"));
    }
    SUBCASE("manifest checksum matches the artifact") {
        REQUIRE(run("synth --out " + (wd / "c.csv") + " --n 200 --seed 3") == 0);
        auto manifest = slurp_json(wd / "c.csv.manifest.json");
        CHECK(manifest["command"] == "synth");
        REQUIRE(manifest["outputs"].size() == 1);
        // recompute fnv1a64 over the artifact
        std::string bytes = slurp(wd / "c.csv");
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        CHECK(manifest["outputs"][0]["checksum"] == std::string(buf));
    }
}

TEST_CASE("train command surfaces") {
    Workdir wd;
    REQUIRE(run("synth --out " + (wd / "d.csv") + " --n 700 --seed 11") == 0);
    write_quick_config(wd / "quick.json");

    SUBCASE("missing required flag is a usage error") {
        CHECK(run("train --model base-dnn --out " + (wd / "m.json")) == 2);
    }
    SUBCASE("unknown model name is a usage error") {
        CHECK(run("train --model forest --data " + (wd / "d.csv") + " --out " +
                  (wd / "m.json")) == 2);
    }
    SUBCASE("interaction pairs on the plain baseline are a usage error") {
        CHECK(run("train --model base-dnn --data " + (wd / "d.csv") + " --out " +
                  (wd / "m.json") + " --qi-pairs LSBP-Exs") == 2);
    }
    SUBCASE("auto:7 screening lands seven pairs in the checkpoint") {
        REQUIRE(run("train --model qidnn --data " + (wd / "d.csv") + " --out " +
                    (wd / "q.json") + " --qi-pairs auto:7 --seed 7 --config " +
                    (wd / "quick.json")) == 0);
        auto ckpt = slurp_json(wd / "q.json");
        CHECK(ckpt["model_kind"] == "qidnn");
        CHECK(ckpt["spec"]["screened_pairs"].size() == 7);
        CHECK(fs::exists(wd / "q.trace.csv"));
        CHECK(fs::exists(wd / "q.json.manifest.json"));
    }
    SUBCASE("mmoe defaults to twenty inputs and three pairs") {
        REQUIRE(run("train --model mmoe --data " + (wd / "d.csv") + " --out " +
                    (wd / "m.json") + " --seed 7 --config " + (wd / "quick.json")) == 0);
        auto ckpt = slurp_json(wd / "m.json");
        CHECK(ckpt["model_kind"] == "mmoe");
        CHECK(ckpt["feature_indices"].size() == 20);
        CHECK(ckpt["spec"]["screened_pairs"].size() == 3);
        CHECK(ckpt["spec"]["input_dim"] == 20);

        // the evaluation report carries both objective sections
        REQUIRE(run("eval --model-path " + (wd / "m.json") + " --data " + (wd / "d.csv") +
                    " --split test --out " + (wd / "mrep.json")) == 0);
        auto rep = slurp_json(wd / "mrep.json");
        CHECK(rep["per_class"].size() == 4);
        REQUIRE(rep.contains("stroke"));
        CHECK(rep["stroke"].contains("precision"));
        CHECK(rep["stroke"].contains("recall"));
        CHECK(rep["stroke"].contains("f1"));
    }
}

TEST_CASE("eval, explain, project round trip") {
    Workdir wd;
    REQUIRE(run("synth --out " + (wd / "d.csv") + " --n 600 --seed 13") == 0);
    write_quick_config(wd / "quick.json");
    REQUIRE(run("train --model base-dnn --data " + (wd / "d.csv") + " --out " +
                (wd / "base.json") + " --seed 13 --config " + (wd / "quick.json")) == 0);

    SUBCASE("eval writes a report whose supports cover the split") {
        REQUIRE(run("eval --model-path " + (wd / "base.json") + " --data " + (wd / "d.csv") +
                    " --split test --out " + (wd / "report.json")) == 0);
        auto rep = slurp_json(wd / "report.json");
        std::size_t total = 0;
        for (const auto& row : rep["per_class"]) total += row["support"].get<std::size_t>();
        CHECK(total == rep["n"].get<std::size_t>());
        CHECK(rep["accuracy"].get<double>() >= 0.0);
        CHECK(rep["accuracy"].get<double>() <= 1.0);
    }

    SUBCASE("tampered schema fingerprint is a compatibility error") {
        std::string ckpt = slurp(wd / "base.json");
        auto pos = ckpt.find("\"schema_fingerprint\": \"");
        REQUIRE(pos != std::string::npos);
        ckpt[pos + 24] = ckpt[pos + 24] == '0' ? '1' : '0';
        std::ofstream(wd / "bad.json") << ckpt;
        CHECK(run("eval --model-path " + (wd / "bad.json") + " --data " + (wd / "d.csv")) == 4);
    }

    SUBCASE("explain emits four force plots and a json, deterministically") {
        std::string base_args = "explain --model-path " + (wd / "base.json") + " --data " +
                                (wd / "d.csv") + " --sample-id 3 --seed 9 --out-json ";
        REQUIRE(run(base_args + (wd / "e1.json") + " --out-svg " + (wd / "f1")) == 0);
        REQUIRE(run(base_args + (wd / "e2.json") + " --out-svg " + (wd / "f2")) == 0);
        for (const char* state : {"low", "medium", "high", "attack"}) {
            CHECK(fs::exists(wd / ("f1_" + std::string(state) + ".svg")));
            CHECK(slurp(wd / ("f1_" + std::string(state) + ".svg")) ==
                  slurp(wd / ("f2_" + std::string(state) + ".svg")));
        }
        auto e1 = slurp_json(wd / "e1.json");
        CHECK(e1["explanations"].size() == 4);
        CHECK(slurp(wd / "e1.json") == slurp(wd / "e2.json"));
        // additive reading holds inside each explanation
        for (const auto& exp : e1["explanations"]) {
            double sum = 0.0;
            for (const auto& item : exp["phi"]) sum += item["phi"].get<double>();
            double gap = exp["prediction"].get<double>() - exp["base_value"].get<double>() - sum;
            CHECK(std::fabs(gap) <= 1e-9);
        }
    }

    SUBCASE("unknown sample id is a data error") {
        CHECK(run("explain --model-path " + (wd / "base.json") + " --data " + (wd / "d.csv") +
                  " --sample-id 999999 --out-json " + (wd / "e.json") + " --out-svg " +
                  (wd / "f")) == 3);
    }

    SUBCASE("project exports eight coordinate columns and is deterministic") {
        REQUIRE(run("project --model-path " + (wd / "base.json") + " --data " + (wd / "d.csv") +
                    " --out " + (wd / "p1.csv")) == 0);
        REQUIRE(run("project --model-path " + (wd / "base.json") + " --data " + (wd / "d.csv") +
                    " --out " + (wd / "p2.csv")) == 0);
        std::string p1 = slurp(wd / "p1.csv");
        CHECK(p1 == slurp(wd / "p2.csv"));
        std::istringstream ss(p1);
        std::string header;
        std::getline(ss, header);
        CHECK(header ==
              "sample_id,risk_state,low_x,low_y,medium_x,medium_y,high_x,high_y,attack_x,"
              "attack_y");
    }

    SUBCASE("project on a model without the visualization layer fails with code 4") {
        write_quick_config(wd / "quick2.json");
        REQUIRE(run("train --model qidnn --data " + (wd / "d.csv") + " --out " +
                    (wd / "q.json") + " --qi-pairs LSBP-Exs --seed 13 --config " +
                    (wd / "quick2.json")) == 0);
        CHECK(run("project --model-path " + (wd / "q.json") + " --data " + (wd / "d.csv") +
                  " --out " + (wd / "p.csv")) == 4);
    }
}

TEST_CASE("screen command ranks pairs from a checkpointed model") {
    Workdir wd;
    REQUIRE(run("synth --out " + (wd / "d.csv") + " --n 900 --seed 17") == 0);
    write_quick_config(wd / "quick.json");
    REQUIRE(run("train --model base-dnn --data " + (wd / "d.csv") + " --out " +
                (wd / "base.json") + " --seed 17 --config " + (wd / "quick.json")) == 0);
    REQUIRE(run("screen --model-path " + (wd / "base.json") + " --data " + (wd / "d.csv") +
                " --top-m 5 --seed 17 --out " + (wd / "pairs.json")) == 0);
    auto pairs = slurp_json(wd / "pairs.json");
    CHECK(pairs["pairs"].size() == 5);
    for (const auto& p : pairs["pairs"]) CHECK(p["score"].get<double>() >= 0.0);

    SUBCASE("dependence triples export") {
        REQUIRE(run("screen --model-path " + (wd / "base.json") + " --data " + (wd / "d.csv") +
                    " --top-m 3 --seed 17 --dependence LSBP,Exs --out-dependence " +
                    (wd / "dep.csv")) == 0);
        std::istringstream ss(slurp(wd / "dep.csv"));
        std::string header;
        std::getline(ss, header);
        CHECK(header == "value,phi,companion_value");
        std::size_t rows = 0;
        for (std::string line; std::getline(ss, line);)
            if (!line.empty()) rows++;
        CHECK(rows > 0);
    }
}

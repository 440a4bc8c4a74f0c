#ifndef RISKGRID_MANIFEST_HPP
#define RISKGRID_MANIFEST_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "riskgrid/errors.hpp"

namespace riskgrid {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string checksum_hex(const std::string& bytes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string checksum_file(const std::string& path) {
    return checksum_hex(read_file(path));
}

// Full content to a temp file in the target directory, then rename: readers
// never observe partial output.
inline void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw data_error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out.good()) throw data_error("short write on '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw data_error("cannot move output into place at '" + path + "'");
    }
}

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Every command drops one of these alongside its outputs; re-running the
// same command with the same seed must reproduce the recorded checksums.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, checksum
    std::vector<std::pair<std::string, std::string>> outputs; // path, checksum
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;

    void add_input(const std::string& path) { inputs.emplace_back(path, checksum_file(path)); }
    void add_output(const std::string& path) { outputs.emplace_back(path, checksum_file(path)); }

    nlohmann::ordered_json to_json() const {
        auto files = [](const std::vector<std::pair<std::string, std::string>>& v) {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const auto& [p, c] : v)
                arr.push_back(nlohmann::ordered_json{{"path", p}, {"checksum", c}});
            return arr;
        };
        return nlohmann::ordered_json{{"command", command}, {"seed", seed},
                                      {"config", config},   {"inputs", files(inputs)},
                                      {"outputs", files(outputs)}, {"started_at", started_at},
                                      {"finished_at", finished_at}};
    }

    void write(const std::string& path) {
        finished_at = utc_timestamp();
        atomic_write(path, to_json().dump(2) + "\n");
    }
};

} // namespace riskgrid

#endif

#ifndef RISKGRID_ERRORS_HPP
#define RISKGRID_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace riskgrid {

// Shape or dimension mismatch in tensor/model plumbing.
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad content in user-supplied data (CSV cells, labels, sample ids).
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (specs, ranges, argument combinations).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged or could not proceed.
struct train_error : std::runtime_error {
    explicit train_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint/schema/model compatibility problems.
struct compat_error : std::runtime_error {
    explicit compat_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace riskgrid

#endif

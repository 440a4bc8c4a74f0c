#ifndef RISKGRID_TENSOR_HPP
#define RISKGRID_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "riskgrid/errors.hpp"

namespace riskgrid {

// Dense row-major tensor of 64-bit reals. Everything in the model stack is
// rank 1 or 2; rank-1 tensors behave as 1xN rows where a matrix is expected.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != data.size())
            throw shape_error("tensor: shape " + shape_str() + " does not match data length " +
                              std::to_string(data.size()));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    static Tensor zeros(std::size_t r, std::size_t c) {
        return Tensor({r, c}, std::vector<double>(r * c, 0.0));
    }
    static Tensor zeros_like(const Tensor& t) {
        return Tensor(t.shape, std::vector<double>(t.data.size(), 0.0));
    }
    static Tensor row(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor({1, n}, std::move(v));
    }
    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

    std::size_t numel() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : (shape.size() == 1 ? 1 : shape[0]); }
    std::size_t cols() const {
        return shape.empty() ? 0 : (shape.size() == 1 ? shape[0] : shape[1]);
    }
    bool is_scalar() const { return numel() == 1; }
    double scalar_value() const {
        if (!is_scalar()) throw shape_error("tensor: expected scalar, got " + shape_str());
        return data[0];
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << ']';
        return os.str();
    }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
}

} // namespace riskgrid

#endif

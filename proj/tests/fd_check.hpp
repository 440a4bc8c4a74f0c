#ifndef RISKGRID_TESTS_FD_CHECK_HPP
#define RISKGRID_TESTS_FD_CHECK_HPP

// Central finite-difference oracle for gradient checks. Kept independent of
// the tape's backward pass: it only perturbs parameter values and re-runs a
// caller-supplied forward function.

#include <cmath>
#include <functional>
#include <vector>

#include "riskgrid/autodiff.hpp"

namespace riskgrid::testing {

// d(loss)/d(p[i]) by central differences; `forward` must rebuild the loss
// from current parameter values on every call.
inline std::vector<double> fd_grad(Param& p, const std::function<double()>& forward,
                                   double h = 1e-5) {
    std::vector<double> g(p.value.data.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double keep = p.value.data[i];
        p.value.data[i] = keep + h;
        double up = forward();
        p.value.data[i] = keep - h;
        double down = forward();
        p.value.data[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// Relative error with a floor so that near-zero gradients compare in
// absolute terms (central differences bottom out around 1e-10).
inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::fabs(a - b) / std::max({floor, std::fabs(a), std::fabs(b)});
}

inline double max_rel_err(const std::vector<double>& ad, const std::vector<double>& fd,
                          double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i)
        worst = std::max(worst, rel_err(ad[i], fd[i], floor));
    return worst;
}

} // namespace riskgrid::testing

#endif

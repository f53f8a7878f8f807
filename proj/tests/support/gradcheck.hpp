#pragma once

// Central finite-difference gradient verification against an arbitrary
// scalar loss over a flat parameter vector.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace testsupport {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t n_params = 0;
    std::size_t worst_index = 0;
};

// loss() must read the parameter vector through the reference captured by
// the caller. step is the central-difference half-width.
inline GradCheckResult gradcheck(std::vector<double>& params,
                                 const std::vector<double>& analytic_grads,
                                 const std::function<double()>& loss, double step = 1e-5) {
    GradCheckResult result;
    result.n_params = params.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = loss();
        params[i] = saved - step;
        const double down = loss();
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double analytic = analytic_grads[i];
        const double rel = std::abs(analytic - numeric) /
                           std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_index = i;
        }
    }
    return result;
}

}  // namespace testsupport

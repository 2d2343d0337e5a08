#pragma once
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mrhar/rng.hpp"
#include "mrhar/tensor.hpp"

namespace mrhar {

inline TensorPtr init_random(Shape shape, Rng& rng, double bound = 0.5) {
    std::vector<double> v(numel_of(shape));
    for (auto& e : v) e = rng.uniform(-bound, bound);
    return make_tensor(std::move(shape), std::move(v), true);
}

} // namespace mrhar

namespace mrhar::test {

// Central finite differences of a scalar function of the given parameters.
// f must rebuild its computation from scratch on every call (define-by-run);
// grads found in params afterwards are compared against the numeric estimate.
struct GradCheckResult {
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::string worst_param;
};

inline GradCheckResult finite_difference_check(const std::vector<TensorPtr>& params,
                                               const std::function<double()>& f,
                                               const std::function<void()>& run_backward,
                                               double h = 1e-5) {
    run_backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p->grad);

    GradCheckResult res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        for (size_t j = 0; j < p.data.size(); ++j) {
            double keep = p.data[j];
            p.data[j] = keep + h;
            double up = f();
            p.data[j] = keep - h;
            double down = f();
            p.data[j] = keep;
            double numeric = (up - down) / (2 * h);
            double a = analytic[pi][j];
            // The 1e-6 floor keeps near-zero gradients measurable: central
            // differences at h=1e-5 carry ~1e-11 absolute noise, so a pure
            // relative error is meaningless below that scale.
            double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
            double rel = std::fabs(a - numeric) / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_analytic = a;
                res.worst_numeric = numeric;
                res.worst_param = p.name + "[" + std::to_string(j) + "]";
            }
        }
    }
    return res;
}

} // namespace mrhar::test

#pragma once
#include <vector>

#include "mrhar/tensor.hpp"

namespace mrhar {

// Adam with bias correction. The state tracks exactly one parameter list;
// trainers refresh lr from lr_schedule between epochs.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m, v;

    AdamState(const std::vector<TensorPtr>& params, double lr_);
};

void adam_step(const std::vector<TensorPtr>& params, AdamState& state);

// initial_lr * 0.5^floor(epoch / half_period)
double lr_schedule(double initial_lr, int epoch, int half_period);

} // namespace mrhar

#include "mrhar/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mrhar {

AdamState::AdamState(const std::vector<TensorPtr>& params, double lr_) : lr(lr_) {
    if (lr <= 0) throw ConfigError("adam: lr must be positive, got " + std::to_string(lr));
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
        m.emplace_back(p->data.size(), 0.0);
        v.emplace_back(p->data.size(), 0.0);
    }
}

void adam_step(const std::vector<TensorPtr>& params, AdamState& state) {
    if (params.size() != state.m.size())
        throw ConfigError("adam: state tracks " + std::to_string(state.m.size()) +
                          " parameters, got " + std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (p->grad.size() != p->data.size())
            throw DataError("adam: missing grad for parameter '" +
                            (p->name.empty() ? std::string("<unnamed>") : p->name) + "'");
        if (state.m[i].size() != p->data.size())
            throw ConfigError("adam: state size mismatch for parameter '" + p->name + "'");
    }

    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.data.size(); ++j) {
            double g = p.grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            p.data[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double lr_schedule(double initial_lr, int epoch, int half_period) {
    if (half_period <= 0) throw ConfigError("lr_schedule: half_period must be positive");
    if (epoch < 0) throw ConfigError("lr_schedule: epoch must be non-negative");
    return initial_lr * std::pow(0.5, epoch / half_period);
}

} // namespace mrhar

#pragma once
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mrhar/errors.hpp"

namespace mrhar {

using Shape = std::vector<int>;

// Dense 64-bit real tensor. Rank 0 (scalar, shape {}), rank 1 (vector) or
// rank 2 (row-major matrix). Gradients are flat arrays of the same length,
// allocated when requires_grad is set or when a backward pass reaches the
// tensor.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    // True when d(loss)/d(this) must be propagated: set for parameters and
    // for any graph output computed from one. Lets backward skip constants.
    bool flow = false;
    // Last backward pass that reset this tensor's grad (see Graph::backward).
    uint64_t visit_stamp = 0;
    std::string name;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

    int rank() const { return static_cast<int>(shape.size()); }
    int numel() const {
        int n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

    bool is_scalar() const { return shape.empty(); }
    double scalar_value() const { return data[0]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() { grad.assign(data.size(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline int numel_of(const Shape& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline TensorPtr make_tensor(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (numel_of(shape) != static_cast<int>(values.size()))
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    auto t = std::make_shared<Tensor>(std::move(shape), std::move(values));
    t->requires_grad = requires_grad;
    t->flow = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

inline TensorPtr zeros(Shape shape, bool requires_grad = false) {
    return make_tensor(shape, std::vector<double>(numel_of(shape), 0.0), requires_grad);
}

inline TensorPtr scalar_tensor(double v) { return make_tensor({}, {v}); }

} // namespace mrhar

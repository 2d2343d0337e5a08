#include "mrhar/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace mrhar {

namespace {

bool any_flow(const std::vector<TensorPtr>& ts) {
    for (const auto& t : ts)
        if (t->flow) return true;
    return false;
}

void require(bool cond, const char* op, const std::string& detail) {
    if (!cond) throw ShapeError(std::string(op) + ": " + detail);
}

} // namespace

TensorPtr Graph::emit(const char* op, std::vector<TensorPtr> inputs, TensorPtr out,
                      std::function<void()> back) {
    out->flow = any_flow(inputs);
    nodes_.push_back(Node{op, std::move(inputs), out, std::move(back)});
    return out;
}

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b) {
    // (m x k)(k x n) -> (m x n); vectors act as 1 x k on the left and k x 1
    // on the right, with the unit dimension dropped from the result.
    int m, k, n;
    Shape out_shape;
    if (a->rank() == 2 && b->rank() == 2) {
        m = a->rows(); k = a->cols(); n = b->cols();
        require(b->rows() == k, "matmul",
                "inner dims " + std::to_string(k) + " vs " + std::to_string(b->rows()) + " (" +
                    shape_str(a->shape) + " * " + shape_str(b->shape) + ")");
        out_shape = {m, n};
    } else if (a->rank() == 1 && b->rank() == 2) {
        m = 1; k = a->shape[0]; n = b->cols();
        require(b->rows() == k, "matmul",
                "vector length " + std::to_string(k) + " vs matrix rows " +
                    std::to_string(b->rows()));
        out_shape = {n};
    } else if (a->rank() == 2 && b->rank() == 1) {
        m = a->rows(); k = a->cols(); n = 1;
        require(b->shape[0] == k, "matmul",
                "matrix cols " + std::to_string(k) + " vs vector length " +
                    std::to_string(b->shape[0]));
        out_shape = {m};
    } else {
        throw ShapeError("matmul: unsupported ranks " + shape_str(a->shape) + " * " +
                         shape_str(b->shape));
    }

    auto out = zeros(out_shape);
    const double* pa = a->data.data();
    const double* pb = b->data.data();
    double* pc = out->data.data();
    for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
            double av = pa[i * k + l];
            if (av == 0.0) continue;
            const double* brow = pb + l * n;
            double* crow = pc + i * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }

    return emit("matmul", {a, b}, out, [a, b, out, m, k, n]() {
        const double* dc = out->grad.data();
        if (a->flow) {
            double* da = a->grad.data();
            const double* pb = b->data.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    double d = dc[i * n + j];
                    if (d == 0.0) continue;
                    const double* brow = pb + j; // column j of b
                    for (int l = 0; l < k; ++l) da[i * k + l] += d * brow[l * n];
                }
        }
        if (b->flow) {
            double* db = b->grad.data();
            const double* pa = a->data.data();
            for (int l = 0; l < k; ++l)
                for (int i = 0; i < m; ++i) {
                    double av = pa[i * k + l];
                    if (av == 0.0) continue;
                    const double* crow = dc + i * n;
                    double* brow = db + l * n;
                    for (int j = 0; j < n; ++j) brow[j] += av * crow[j];
                }
        }
    });
}

TensorPtr Graph::matmul_nt(const TensorPtr& a, const TensorPtr& b) {
    require(a->rank() == 2 && b->rank() == 2, "matmul_nt",
            "needs two matrices, got " + shape_str(a->shape) + " and " + shape_str(b->shape));
    require(a->cols() == b->cols(), "matmul_nt",
            "inner dims " + std::to_string(a->cols()) + " vs " + std::to_string(b->cols()));
    int m = a->rows(), k = a->cols(), n = b->rows();
    auto out = zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            const double* ra = &a->data[static_cast<size_t>(i) * k];
            const double* rb = &b->data[static_cast<size_t>(j) * k];
            for (int l = 0; l < k; ++l) s += ra[l] * rb[l];
            out->data[static_cast<size_t>(i) * n + j] = s;
        }

    return emit("matmul_nt", {a, b}, out, [a, b, out, m, k, n]() {
        const double* dc = out->grad.data();
        if (a->flow) {
            // dA = dC * B
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    double d = dc[i * n + j];
                    if (d == 0.0) continue;
                    for (int l = 0; l < k; ++l) a->grad[i * k + l] += d * b->data[j * k + l];
                }
        }
        if (b->flow) {
            // dB = dC^T * A
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < m; ++i) {
                    double d = dc[i * n + j];
                    if (d == 0.0) continue;
                    for (int l = 0; l < k; ++l) b->grad[j * k + l] += d * a->data[i * k + l];
                }
        }
    });
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape == b->shape, "add",
            "shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = zeros(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    return emit("add", {a, b}, out, [a, b, out]() {
        if (a->flow)
            for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
        if (b->flow)
            for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
    });
}

TensorPtr Graph::sub(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape == b->shape, "sub",
            "shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = zeros(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] - b->data[i];
    return emit("sub", {a, b}, out, [a, b, out]() {
        if (a->flow)
            for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
        if (b->flow)
            for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] -= out->grad[i];
    });
}

TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape == b->shape, "mul",
            "shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = zeros(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
    return emit("mul", {a, b}, out, [a, b, out]() {
        if (a->flow)
            for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
        if (b->flow)
            for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
    });
}

TensorPtr Graph::affine(const TensorPtr& a, double k, double c) {
    auto out = zeros(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = k * a->data[i] + c;
    return emit("affine", {a}, out, [a, out, k]() {
        if (a->flow)
            for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += k * out->grad[i];
    });
}

TensorPtr Graph::add_row_broadcast(const TensorPtr& m, const TensorPtr& v) {
    require(m->rank() == 2 && v->rank() == 1, "add_row_broadcast",
            "needs matrix + vector, got " + shape_str(m->shape) + " and " + shape_str(v->shape));
    require(m->cols() == v->shape[0], "add_row_broadcast",
            "cols " + std::to_string(m->cols()) + " vs vector length " +
                std::to_string(v->shape[0]));
    int r = m->rows(), c = m->cols();
    auto out = zeros(m->shape);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out->data[i * c + j] = m->data[i * c + j] + v->data[j];
    return emit("add_row_broadcast", {m, v}, out, [m, v, out, r, c]() {
        if (m->flow)
            for (size_t i = 0; i < out->grad.size(); ++i) m->grad[i] += out->grad[i];
        if (v->flow)
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) v->grad[j] += out->grad[i * c + j];
    });
}

TensorPtr Graph::rowwise_dot(const TensorPtr& a, const TensorPtr& b) {
    require(a->rank() == 2 && b->rank() == 2 && a->shape == b->shape, "rowwise_dot",
            "needs equal matrices, got " + shape_str(a->shape) + " and " + shape_str(b->shape));
    int r = a->rows(), c = a->cols();
    auto out = zeros({r});
    for (int i = 0; i < r; ++i) {
        double s = 0;
        for (int j = 0; j < c; ++j) s += a->data[i * c + j] * b->data[i * c + j];
        out->data[i] = s;
    }
    return emit("rowwise_dot", {a, b}, out, [a, b, out, r, c]() {
        for (int i = 0; i < r; ++i) {
            double d = out->grad[i];
            if (d == 0.0) continue;
            if (a->flow)
                for (int j = 0; j < c; ++j) a->grad[i * c + j] += d * b->data[i * c + j];
            if (b->flow)
                for (int j = 0; j < c; ++j) b->grad[i * c + j] += d * a->data[i * c + j];
        }
    });
}

TensorPtr Graph::tanh(const TensorPtr& a) {
    auto out = zeros(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = std::tanh(a->data[i]);
    return emit("tanh", {a}, out, [a, out]() {
        if (!a->flow) return;
        for (size_t i = 0; i < out->grad.size(); ++i)
            a->grad[i] += out->grad[i] * (1.0 - out->data[i] * out->data[i]);
    });
}

TensorPtr Graph::sigmoid(const TensorPtr& a) {
    auto out = zeros(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = 1.0 / (1.0 + std::exp(-a->data[i]));
    return emit("sigmoid", {a}, out, [a, out]() {
        if (!a->flow) return;
        for (size_t i = 0; i < out->grad.size(); ++i)
            a->grad[i] += out->grad[i] * out->data[i] * (1.0 - out->data[i]);
    });
}

TensorPtr Graph::relu(const TensorPtr& a) {
    auto out = zeros(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] > 0 ? a->data[i] : 0.0;
    return emit("relu", {a}, out, [a, out]() {
        if (!a->flow) return;
        for (size_t i = 0; i < out->grad.size(); ++i)
            if (a->data[i] > 0) a->grad[i] += out->grad[i];
    });
}

TensorPtr Graph::softmax(const TensorPtr& a) {
    require(a->rank() == 1 || a->rank() == 2, "softmax",
            "needs vector or matrix, got " + shape_str(a->shape));
    int rows = a->rank() == 2 ? a->rows() : 1;
    int cols = a->rank() == 2 ? a->cols() : a->shape[0];
    auto out = zeros(a->shape);
    for (int i = 0; i < rows; ++i) {
        const double* x = &a->data[static_cast<size_t>(i) * cols];
        double* y = &out->data[static_cast<size_t>(i) * cols];
        double mx = x[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double z = 0;
        for (int j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            z += y[j];
        }
        for (int j = 0; j < cols; ++j) y[j] /= z;
    }
    return emit("softmax", {a}, out, [a, out, rows, cols]() {
        if (!a->flow) return;
        for (int i = 0; i < rows; ++i) {
            const double* y = &out->data[static_cast<size_t>(i) * cols];
            const double* dy = &out->grad[static_cast<size_t>(i) * cols];
            double dot = 0;
            for (int j = 0; j < cols; ++j) dot += y[j] * dy[j];
            double* dx = &a->grad[static_cast<size_t>(i) * cols];
            for (int j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
        }
    });
}

TensorPtr Graph::mean_all(const TensorPtr& a) {
    auto out = scalar_tensor(0.0);
    double s = 0;
    for (double v : a->data) s += v;
    int n = a->numel();
    out->data[0] = s / n;
    return emit("mean_all", {a}, out, [a, out, n]() {
        if (!a->flow) return;
        double d = out->grad[0] / n;
        for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += d;
    });
}

TensorPtr Graph::mean_over_rows(const TensorPtr& m) {
    require(m->rank() == 2, "mean_over_rows", "needs a matrix, got " + shape_str(m->shape));
    int r = m->rows(), c = m->cols();
    auto out = zeros({c});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out->data[j] += m->data[i * c + j];
    for (int j = 0; j < c; ++j) out->data[j] /= r;
    return emit("mean_over_rows", {m}, out, [m, out, r, c]() {
        if (!m->flow) return;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m->grad[i * c + j] += out->grad[j] / r;
    });
}

TensorPtr Graph::concat(const TensorPtr& a, const TensorPtr& b) {
    require(a->rank() == 1 && b->rank() == 1, "concat",
            "needs two vectors, got " + shape_str(a->shape) + " and " + shape_str(b->shape));
    int na = a->shape[0], nb = b->shape[0];
    auto out = zeros({na + nb});
    std::copy(a->data.begin(), a->data.end(), out->data.begin());
    std::copy(b->data.begin(), b->data.end(), out->data.begin() + na);
    return emit("concat", {a, b}, out, [a, b, out, na, nb]() {
        if (a->flow)
            for (int i = 0; i < na; ++i) a->grad[i] += out->grad[i];
        if (b->flow)
            for (int i = 0; i < nb; ++i) b->grad[i] += out->grad[na + i];
    });
}

TensorPtr Graph::concat_cols(const std::vector<TensorPtr>& mats) {
    require(!mats.empty(), "concat_cols", "empty input list");
    int r = mats[0]->rows();
    int total = 0;
    for (const auto& m : mats) {
        require(m->rank() == 2 && m->rows() == r, "concat_cols",
                "row mismatch, expected " + std::to_string(r) + " got " + shape_str(m->shape));
        total += m->cols();
    }
    auto out = zeros({r, total});
    int off = 0;
    for (const auto& m : mats) {
        int c = m->cols();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) out->data[i * total + off + j] = m->data[i * c + j];
        off += c;
    }
    return emit("concat_cols", mats, out, [mats, out, r, total]() {
        int off = 0;
        for (const auto& m : mats) {
            int c = m->cols();
            if (m->flow)
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) m->grad[i * c + j] += out->grad[i * total + off + j];
            off += c;
        }
    });
}

TensorPtr Graph::slice_cols(const TensorPtr& m, int c0, int c1) {
    require(m->rank() == 2, "slice_cols", "needs a matrix, got " + shape_str(m->shape));
    require(0 <= c0 && c0 < c1 && c1 <= m->cols(), "slice_cols",
            "range [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " +
                std::to_string(m->cols()) + " cols");
    int r = m->rows(), c = m->cols(), w = c1 - c0;
    auto out = zeros({r, w});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) out->data[i * w + j] = m->data[i * c + c0 + j];
    return emit("slice_cols", {m}, out, [m, out, r, c, c0, w]() {
        if (!m->flow) return;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < w; ++j) m->grad[i * c + c0 + j] += out->grad[i * w + j];
    });
}

TensorPtr Graph::slice_rows(const TensorPtr& m, int r0, int r1) {
    require(m->rank() == 2, "slice_rows", "needs a matrix, got " + shape_str(m->shape));
    require(0 <= r0 && r0 < r1 && r1 <= m->rows(), "slice_rows",
            "range [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " +
                std::to_string(m->rows()) + " rows");
    int c = m->cols(), h = r1 - r0;
    auto out = zeros({h, c});
    std::copy(m->data.begin() + static_cast<size_t>(r0) * c,
              m->data.begin() + static_cast<size_t>(r1) * c, out->data.begin());
    return emit("slice_rows", {m}, out, [m, out, r0, c, h]() {
        if (!m->flow) return;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < c; ++j) m->grad[(r0 + i) * c + j] += out->grad[i * c + j];
    });
}

TensorPtr Graph::slice(const TensorPtr& v, int i0, int i1) {
    require(v->rank() == 1, "slice", "needs a vector, got " + shape_str(v->shape));
    require(0 <= i0 && i0 < i1 && i1 <= v->shape[0], "slice",
            "range [" + std::to_string(i0) + "," + std::to_string(i1) + ") of length " +
                std::to_string(v->shape[0]));
    auto out = zeros({i1 - i0});
    std::copy(v->data.begin() + i0, v->data.begin() + i1, out->data.begin());
    return emit("slice", {v}, out, [v, out, i0]() {
        if (!v->flow) return;
        for (size_t i = 0; i < out->grad.size(); ++i) v->grad[i0 + i] += out->grad[i];
    });
}

TensorPtr Graph::row(const TensorPtr& m, int r) {
    require(m->rank() == 2, "row", "needs a matrix, got " + shape_str(m->shape));
    require(0 <= r && r < m->rows(), "row",
            "index " + std::to_string(r) + " of " + std::to_string(m->rows()) + " rows");
    int c = m->cols();
    auto out = zeros({c});
    std::copy(m->data.begin() + static_cast<size_t>(r) * c,
              m->data.begin() + static_cast<size_t>(r + 1) * c, out->data.begin());
    return emit("row", {m}, out, [m, out, r, c]() {
        if (!m->flow) return;
        for (int j = 0; j < c; ++j) m->grad[r * c + j] += out->grad[j];
    });
}

TensorPtr Graph::stack_rows(const std::vector<TensorPtr>& rows) {
    require(!rows.empty(), "stack_rows", "empty input list");
    int c = rows[0]->shape.at(0);
    for (const auto& v : rows)
        require(v->rank() == 1 && v->shape[0] == c, "stack_rows",
                "length mismatch, expected " + std::to_string(c) + " got " + shape_str(v->shape));
    int r = static_cast<int>(rows.size());
    auto out = zeros({r, c});
    for (int i = 0; i < r; ++i)
        std::copy(rows[i]->data.begin(), rows[i]->data.end(), out->data.begin() + static_cast<size_t>(i) * c);
    return emit("stack_rows", rows, out, [rows, out, c]() {
        for (size_t i = 0; i < rows.size(); ++i) {
            if (!rows[i]->flow) continue;
            for (int j = 0; j < c; ++j) rows[i]->grad[j] += out->grad[i * c + j];
        }
    });
}

TensorPtr Graph::gru_step(const TensorPtr& x, const TensorPtr& h, const TensorPtr& Wz,
                          const TensorPtr& Wr, const TensorPtr& Wh, const TensorPtr& Uz,
                          const TensorPtr& Ur, const TensorPtr& Uh, const TensorPtr& bz,
                          const TensorPtr& br, const TensorPtr& bh) {
    require(x->rank() == 1 && h->rank() == 1, "gru_step",
            "x and h must be vectors, got " + shape_str(x->shape) + " and " + shape_str(h->shape));
    int in = x->shape[0], hid = h->shape[0];
    require(Wz->rank() == 2 && Wz->rows() == in && Wz->cols() == hid, "gru_step",
            "Wz is " + shape_str(Wz->shape) + ", expected [" + std::to_string(in) + "x" +
                std::to_string(hid) + "]");
    require(Uz->rank() == 2 && Uz->rows() == hid && Uz->cols() == hid, "gru_step",
            "Uz is " + shape_str(Uz->shape) + ", expected [" + std::to_string(hid) + "x" +
                std::to_string(hid) + "]");

    auto vecmat = [](const double* v, const Tensor& m, double* out) {
        int rows = m.shape[0], cols = m.shape[1];
        for (int i = 0; i < rows; ++i) {
            double vi = v[i];
            if (vi == 0.0) continue;
            const double* row = &m.data[static_cast<size_t>(i) * cols];
            for (int j = 0; j < cols; ++j) out[j] += vi * row[j];
        }
    };

    // saved activations for the backward pass
    auto z = std::make_shared<std::vector<double>>(hid, 0.0);
    auto r = std::make_shared<std::vector<double>>(hid, 0.0);
    auto c = std::make_shared<std::vector<double>>(hid, 0.0);
    auto rh = std::make_shared<std::vector<double>>(hid, 0.0);

    std::vector<double> az(bz->data), ar(br->data), ac(bh->data);
    vecmat(x->data.data(), *Wz, az.data());
    vecmat(h->data.data(), *Uz, az.data());
    vecmat(x->data.data(), *Wr, ar.data());
    vecmat(h->data.data(), *Ur, ar.data());
    for (int j = 0; j < hid; ++j) {
        (*z)[j] = 1.0 / (1.0 + std::exp(-az[j]));
        (*r)[j] = 1.0 / (1.0 + std::exp(-ar[j]));
        (*rh)[j] = (*r)[j] * h->data[j];
    }
    vecmat(x->data.data(), *Wh, ac.data());
    vecmat(rh->data(), *Uh, ac.data());
    auto out = zeros({hid});
    for (int j = 0; j < hid; ++j) {
        (*c)[j] = std::tanh(ac[j]);
        out->data[j] = (1.0 - (*z)[j]) * h->data[j] + (*z)[j] * (*c)[j];
    }

    auto back = [=]() {
        int in_d = x->shape[0], hd = h->shape[0];
        const double* dy = out->grad.data();
        std::vector<double> da_z(hd), da_r(hd), da_c(hd), d_rh(hd, 0.0);
        for (int j = 0; j < hd; ++j) {
            double zj = (*z)[j], cj = (*c)[j];
            da_c[j] = dy[j] * zj * (1.0 - cj * cj);
            da_z[j] = dy[j] * (cj - h->data[j]) * zj * (1.0 - zj);
        }
        // through the candidate: d(rh) = da_c Uh^T, then dr, and h's direct parts
        for (int i = 0; i < hd; ++i) {
            const double* row = &Uh->data[static_cast<size_t>(i) * hd];
            double s = 0;
            for (int j = 0; j < hd; ++j) s += da_c[j] * row[j];
            d_rh[i] = s;
        }
        for (int j = 0; j < hd; ++j) {
            double rj = (*r)[j];
            da_r[j] = d_rh[j] * h->data[j] * rj * (1.0 - rj);
        }

        if (h->flow) {
            for (int j = 0; j < hd; ++j)
                h->grad[j] += dy[j] * (1.0 - (*z)[j]) + d_rh[j] * (*r)[j];
            for (int i = 0; i < hd; ++i) {
                const double* rz = &Uz->data[static_cast<size_t>(i) * hd];
                const double* rr = &Ur->data[static_cast<size_t>(i) * hd];
                double s = 0;
                for (int j = 0; j < hd; ++j) s += da_z[j] * rz[j] + da_r[j] * rr[j];
                h->grad[i] += s;
            }
        }
        if (x->flow) {
            for (int i = 0; i < in_d; ++i) {
                const double* rz = &Wz->data[static_cast<size_t>(i) * hd];
                const double* rr = &Wr->data[static_cast<size_t>(i) * hd];
                const double* rc = &Wh->data[static_cast<size_t>(i) * hd];
                double s = 0;
                for (int j = 0; j < hd; ++j)
                    s += da_z[j] * rz[j] + da_r[j] * rr[j] + da_c[j] * rc[j];
                x->grad[i] += s;
            }
        }
        auto outer = [](const double* v, int n, const std::vector<double>& d, TensorPtr W) {
            if (!W->flow) return;
            int cols = static_cast<int>(d.size());
            for (int i = 0; i < n; ++i) {
                double vi = v[i];
                if (vi == 0.0) continue;
                double* row = &W->grad[static_cast<size_t>(i) * cols];
                for (int j = 0; j < cols; ++j) row[j] += vi * d[j];
            }
        };
        outer(x->data.data(), in_d, da_z, Wz);
        outer(x->data.data(), in_d, da_r, Wr);
        outer(x->data.data(), in_d, da_c, Wh);
        outer(h->data.data(), hd, da_z, Uz);
        outer(h->data.data(), hd, da_r, Ur);
        outer(rh->data(), hd, da_c, Uh);
        if (bz->flow)
            for (int j = 0; j < hd; ++j) bz->grad[j] += da_z[j];
        if (br->flow)
            for (int j = 0; j < hd; ++j) br->grad[j] += da_r[j];
        if (bh->flow)
            for (int j = 0; j < hd; ++j) bh->grad[j] += da_c[j];
    };
    return emit("gru_step", {x, h, Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh}, out, back);
}

AttentionStep Graph::additive_attention(const TensorPtr& query, const TensorPtr& keys,
                                        const TensorPtr& keys_proj, const TensorPtr& W,
                                        const TensorPtr& b, const TensorPtr& v) {
    require(keys->rank() == 2 && keys->rows() >= 1, "additive_attention",
            "needs at least one key, got " + shape_str(keys->shape));
    int s = keys->rows(), kw = keys->cols();
    int a = v->shape.at(0);
    require(keys_proj->rank() == 2 && keys_proj->rows() == s && keys_proj->cols() == a,
            "additive_attention", "projected keys " + shape_str(keys_proj->shape) +
                " vs [" + std::to_string(s) + "x" + std::to_string(a) + "]");
    require(W->rank() == 2 && W->rows() == query->shape.at(0) && W->cols() == a,
            "additive_attention", "W " + shape_str(W->shape) + " incompatible with query " +
                shape_str(query->shape) + " and attention dim " + std::to_string(a));
    require(b->rank() == 1 && b->shape[0] == a, "additive_attention",
            "b " + shape_str(b->shape) + " vs attention dim " + std::to_string(a));

    // qwb = W^T q + b
    std::vector<double> qwb(b->data);
    {
        int qd = query->shape[0];
        for (int i = 0; i < qd; ++i) {
            double qi = query->data[i];
            if (qi == 0.0) continue;
            const double* row = &W->data[static_cast<size_t>(i) * a];
            for (int j = 0; j < a; ++j) qwb[j] += qi * row[j];
        }
    }

    auto t_saved = std::make_shared<std::vector<double>>(static_cast<size_t>(s) * a);
    std::vector<double> scores(s);
    for (int k = 0; k < s; ++k) {
        const double* kp = &keys_proj->data[static_cast<size_t>(k) * a];
        double* tk = &(*t_saved)[static_cast<size_t>(k) * a];
        double sc = 0;
        for (int j = 0; j < a; ++j) {
            tk[j] = std::tanh(kp[j] + qwb[j]);
            sc += v->data[j] * tk[j];
        }
        scores[k] = sc;
    }

    AttentionStep out;
    out.weights = zeros({s});
    {
        double mx = scores[0];
        for (double x : scores) mx = std::max(mx, x);
        double z = 0;
        for (int k = 0; k < s; ++k) {
            out.weights->data[k] = std::exp(scores[k] - mx);
            z += out.weights->data[k];
        }
        for (int k = 0; k < s; ++k) out.weights->data[k] /= z;
    }
    out.context = zeros({kw});
    for (int k = 0; k < s; ++k) {
        double wk = out.weights->data[k];
        const double* row = &keys->data[static_cast<size_t>(k) * kw];
        for (int j = 0; j < kw; ++j) out.context->data[j] += wk * row[j];
    }

    auto weights = out.weights; // captured; stays a diagnostic (flow = false)
    auto context = out.context;
    auto back = [=]() {
        int qd = query->shape[0];
        const double* dc = context->grad.data();
        const double* w = weights->data.data();

        std::vector<double> dw(s, 0.0);
        for (int k = 0; k < s; ++k) {
            const double* row = &keys->data[static_cast<size_t>(k) * kw];
            double sum = 0;
            for (int j = 0; j < kw; ++j) sum += dc[j] * row[j];
            dw[k] = sum;
            if (keys->flow) {
                double wk = w[k];
                double* krow = &keys->grad[static_cast<size_t>(k) * kw];
                for (int j = 0; j < kw; ++j) krow[j] += wk * dc[j];
            }
        }
        double dot = 0;
        for (int k = 0; k < s; ++k) dot += w[k] * dw[k];
        std::vector<double> ds(s);
        for (int k = 0; k < s; ++k) ds[k] = w[k] * (dw[k] - dot);

        std::vector<double> dqwb(a, 0.0);
        for (int k = 0; k < s; ++k) {
            double dsk = ds[k];
            if (dsk == 0.0) continue;
            const double* tk = &(*t_saved)[static_cast<size_t>(k) * a];
            double* kp_grad = keys_proj->flow
                                  ? &keys_proj->grad[static_cast<size_t>(k) * a]
                                  : nullptr;
            for (int j = 0; j < a; ++j) {
                double dpre = dsk * v->data[j] * (1.0 - tk[j] * tk[j]);
                dqwb[j] += dpre;
                if (kp_grad) kp_grad[j] += dpre;
                if (v->flow) v->grad[j] += dsk * tk[j];
            }
        }
        if (b->flow)
            for (int j = 0; j < a; ++j) b->grad[j] += dqwb[j];
        if (W->flow) {
            for (int i = 0; i < qd; ++i) {
                double qi = query->data[i];
                if (qi == 0.0) continue;
                double* row = &W->grad[static_cast<size_t>(i) * a];
                for (int j = 0; j < a; ++j) row[j] += qi * dqwb[j];
            }
        }
        if (query->flow) {
            for (int i = 0; i < qd; ++i) {
                const double* row = &W->data[static_cast<size_t>(i) * a];
                double sum = 0;
                for (int j = 0; j < a; ++j) sum += row[j] * dqwb[j];
                query->grad[i] += sum;
            }
        }
    };
    emit("additive_attention", {query, keys, keys_proj, W, b, v}, out.context, back);
    return out;
}

TensorPtr Graph::embedding_lookup(const TensorPtr& table, const std::vector<int>& ids) {
    require(table->rank() == 2, "embedding_lookup",
            "table must be a matrix, got " + shape_str(table->shape));
    int v = table->rows(), d = table->cols();
    for (int id : ids)
        if (id < 0 || id >= v)
            throw DataError("embedding_lookup: token id " + std::to_string(id) +
                            " outside vocabulary of size " + std::to_string(v));
    int len = static_cast<int>(ids.size());
    auto out = zeros({len, d});
    for (int i = 0; i < len; ++i)
        std::copy(table->data.begin() + static_cast<size_t>(ids[i]) * d,
                  table->data.begin() + static_cast<size_t>(ids[i] + 1) * d,
                  out->data.begin() + static_cast<size_t>(i) * d);
    return emit("embedding_lookup", {table}, out, [table, out, ids, d]() {
        if (!table->flow) return;
        for (size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < d; ++j)
                table->grad[static_cast<size_t>(ids[i]) * d + j] += out->grad[i * d + j];
    });
}

TensorPtr Graph::dropout(const TensorPtr& a, double p, Rng& rng, bool training) {
    if (!training || p <= 0.0) return a; // identity in eval mode
    require(p < 1.0, "dropout", "rate must be < 1, got " + std::to_string(p));
    auto mask = std::make_shared<std::vector<double>>(a->data.size());
    double keep_scale = 1.0 / (1.0 - p);
    auto out = zeros(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) {
        (*mask)[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
        out->data[i] = a->data[i] * (*mask)[i];
    }
    return emit("dropout", {a}, out, [a, out, mask]() {
        if (!a->flow) return;
        for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * (*mask)[i];
    });
}

TensorPtr Graph::cross_entropy_rows(const TensorPtr& logits, const std::vector<int>& targets) {
    require(logits->rank() == 2, "cross_entropy_rows",
            "logits must be a matrix, got " + shape_str(logits->shape));
    int t = logits->rows(), v = logits->cols();
    require(static_cast<int>(targets.size()) == t, "cross_entropy_rows",
            std::to_string(targets.size()) + " targets for " + std::to_string(t) + " rows");
    for (int y : targets)
        if (y < 0 || y >= v)
            throw DataError("cross_entropy_rows: target id " + std::to_string(y) +
                            " outside vocabulary of size " + std::to_string(v));

    auto probs = std::make_shared<std::vector<double>>(logits->data.size());
    double loss = 0;
    for (int i = 0; i < t; ++i) {
        const double* x = &logits->data[static_cast<size_t>(i) * v];
        double* p = &(*probs)[static_cast<size_t>(i) * v];
        double mx = x[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, x[j]);
        double z = 0;
        for (int j = 0; j < v; ++j) {
            p[j] = std::exp(x[j] - mx);
            z += p[j];
        }
        for (int j = 0; j < v; ++j) p[j] /= z;
        loss += (mx + std::log(z)) - x[targets[i]];
    }
    auto out = scalar_tensor(loss / t);
    return emit("cross_entropy_rows", {logits}, out, [logits, out, probs, targets, t, v]() {
        if (!logits->flow) return;
        double d = out->grad[0] / t;
        for (int i = 0; i < t; ++i) {
            const double* p = &(*probs)[static_cast<size_t>(i) * v];
            double* dx = &logits->grad[static_cast<size_t>(i) * v];
            for (int j = 0; j < v; ++j) dx[j] += d * p[j];
            dx[targets[i]] -= d;
        }
    });
}

TensorPtr Graph::bce_mean(const TensorPtr& probs, const TensorPtr& targets) {
    require(probs->shape == targets->shape, "bce_mean",
            "shape mismatch " + shape_str(probs->shape) + " vs " + shape_str(targets->shape));
    constexpr double kClamp = 1e-7;
    int n = probs->numel();
    double loss = 0;
    for (int i = 0; i < n; ++i) {
        double p = std::clamp(probs->data[i], kClamp, 1.0 - kClamp);
        double y = targets->data[i];
        loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    auto out = scalar_tensor(loss / n);
    return emit("bce_mean", {probs, targets}, out, [probs, targets, out, n]() {
        if (!probs->flow) return;
        double d = out->grad[0] / n;
        for (int i = 0; i < n; ++i) {
            double raw = probs->data[i];
            if (raw < kClamp || raw > 1.0 - kClamp) continue; // clamp region: flat
            double y = targets->data[i];
            probs->grad[i] += d * (raw - y) / (raw * (1.0 - raw));
        }
    });
}

TensorPtr Graph::layer_norm_rows(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                                 double eps) {
    require(x->rank() == 2, "layer_norm_rows", "needs a matrix, got " + shape_str(x->shape));
    int r = x->rows(), c = x->cols();
    require(gamma->rank() == 1 && gamma->shape[0] == c, "layer_norm_rows",
            "gamma length " + shape_str(gamma->shape) + " vs cols " + std::to_string(c));
    require(beta->rank() == 1 && beta->shape[0] == c, "layer_norm_rows",
            "beta length " + shape_str(beta->shape) + " vs cols " + std::to_string(c));

    auto xhat = std::make_shared<std::vector<double>>(x->data.size());
    auto inv_sigma = std::make_shared<std::vector<double>>(r);
    auto out = zeros({r, c});
    for (int i = 0; i < r; ++i) {
        const double* xi = &x->data[static_cast<size_t>(i) * c];
        double mu = 0;
        for (int j = 0; j < c; ++j) mu += xi[j];
        mu /= c;
        double var = 0;
        for (int j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
        var /= c;
        double inv = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[i] = inv;
        for (int j = 0; j < c; ++j) {
            double xh = (xi[j] - mu) * inv;
            (*xhat)[static_cast<size_t>(i) * c + j] = xh;
            out->data[static_cast<size_t>(i) * c + j] = gamma->data[j] * xh + beta->data[j];
        }
    }
    return emit("layer_norm_rows", {x, gamma, beta}, out,
                [x, gamma, beta, out, xhat, inv_sigma, r, c]() {
        for (int i = 0; i < r; ++i) {
            const double* dy = &out->grad[static_cast<size_t>(i) * c];
            const double* xh = &(*xhat)[static_cast<size_t>(i) * c];
            if (gamma->flow)
                for (int j = 0; j < c; ++j) gamma->grad[j] += dy[j] * xh[j];
            if (beta->flow)
                for (int j = 0; j < c; ++j) beta->grad[j] += dy[j];
            if (x->flow) {
                double mean_g = 0, mean_gx = 0;
                for (int j = 0; j < c; ++j) {
                    double g = dy[j] * gamma->data[j];
                    mean_g += g;
                    mean_gx += g * xh[j];
                }
                mean_g /= c;
                mean_gx /= c;
                double inv = (*inv_sigma)[i];
                double* dx = &x->grad[static_cast<size_t>(i) * c];
                for (int j = 0; j < c; ++j) {
                    double g = dy[j] * gamma->data[j];
                    dx[j] += inv * (g - mean_g - xh[j] * mean_gx);
                }
            }
        }
    });
}

namespace {
std::atomic<uint64_t> g_backward_pass{0};
}

void Graph::backward(const TensorPtr& loss) {
    if (!loss->is_scalar())
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss->shape));

    // Reset grads of every tensor on the tape once, then accumulate.
    uint64_t pass = ++g_backward_pass;
    auto reset = [pass](const TensorPtr& t) {
        if (t->visit_stamp != pass) {
            t->visit_stamp = pass;
            t->ensure_grad();
            t->zero_grad();
        }
    };
    for (auto& node : nodes_) {
        for (auto& in : node.inputs) reset(in);
        reset(node.out);
    }
    reset(loss);

    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->back) it->back();
}

} // namespace mrhar

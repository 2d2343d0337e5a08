#pragma once
#include <functional>
#include <vector>

#include "mrhar/rng.hpp"
#include "mrhar/tensor.hpp"

namespace mrhar {

// Context vector plus the softmax weights of one additive-attention step.
// The weights tensor is a read-only diagnostic view; gradients flow through
// the context.
struct AttentionStep {
    TensorPtr context;
    TensorPtr weights;
};

// Define-by-run tape. Every op appends one node holding the inputs, the
// output and a backward closure; the tape order is already topological, so
// backward() is a single reverse sweep that visits each node exactly once.
// A Graph is rebuilt per forward pass and confined to one worker.
class Graph {
public:
    // -- arithmetic -----------------------------------------------------
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    // a * b^T, both rank 2
    TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    // k*a + c, elementwise with scalar constants
    TensorPtr affine(const TensorPtr& a, double k, double c);
    TensorPtr scale(const TensorPtr& a, double k) { return affine(a, k, 0.0); }
    // m (rows x c) + v (c) added to every row
    TensorPtr add_row_broadcast(const TensorPtr& m, const TensorPtr& v);
    // per-row dot product of two equally shaped matrices -> vector(rows)
    TensorPtr rowwise_dot(const TensorPtr& a, const TensorPtr& b);

    // -- activations ----------------------------------------------------
    TensorPtr tanh(const TensorPtr& a);
    TensorPtr sigmoid(const TensorPtr& a);
    TensorPtr relu(const TensorPtr& a);
    // rank 1: over the vector; rank 2: per row
    TensorPtr softmax(const TensorPtr& a);

    // -- reductions -----------------------------------------------------
    TensorPtr mean_all(const TensorPtr& a);
    // column means of a matrix -> vector(cols)
    TensorPtr mean_over_rows(const TensorPtr& m);

    // -- structure ------------------------------------------------------
    TensorPtr concat(const TensorPtr& a, const TensorPtr& b); // vectors
    TensorPtr concat_cols(const std::vector<TensorPtr>& mats);
    TensorPtr slice_cols(const TensorPtr& m, int c0, int c1);
    TensorPtr slice_rows(const TensorPtr& m, int r0, int r1);
    TensorPtr slice(const TensorPtr& v, int i0, int i1); // vector slice
    TensorPtr row(const TensorPtr& m, int r);            // -> vector
    TensorPtr stack_rows(const std::vector<TensorPtr>& rows); // vectors -> matrix

    // -- model-specific -------------------------------------------------
    // Fused GRU step: z = sigm(x Wz + h Uz + bz), r = sigm(x Wr + h Ur + br),
    // c = tanh(x Wh + (r*h) Uh + bh), h' = (1-z)*h + z*c. One tape node with
    // a hand-derived backward; the recurrent loops dominate training cost.
    TensorPtr gru_step(const TensorPtr& x, const TensorPtr& h, const TensorPtr& Wz,
                       const TensorPtr& Wr, const TensorPtr& Wh, const TensorPtr& Uz,
                       const TensorPtr& Ur, const TensorPtr& Uh, const TensorPtr& bz,
                       const TensorPtr& br, const TensorPtr& bh);
    // Fused additive-attention step over precomputed key projections:
    // score_k = v . tanh(keys_proj[k] + W q + b), weights = softmax(score),
    // context = sum_k weights[k] * keys[k].
    AttentionStep additive_attention(const TensorPtr& query, const TensorPtr& keys,
                                     const TensorPtr& keys_proj, const TensorPtr& W,
                                     const TensorPtr& b, const TensorPtr& v);
    TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<int>& ids);
    // Inverted dropout: train mode scales kept entries by 1/(1-p); eval is identity.
    TensorPtr dropout(const TensorPtr& a, double p, Rng& rng, bool training);
    // Mean token-level softmax cross entropy; logits (T x V), one target id per row.
    TensorPtr cross_entropy_rows(const TensorPtr& logits, const std::vector<int>& targets);
    // Mean binary cross entropy on probabilities, clamped to [1e-7, 1-1e-7] before the log.
    TensorPtr bce_mean(const TensorPtr& probs, const TensorPtr& targets);
    // Row-wise layer norm with learned gain/bias.
    TensorPtr layer_norm_rows(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                              double eps = 1e-5);

    // Populates grad = d(loss)/d(t) for every participating tensor,
    // overwriting previous grads. loss must be scalar.
    void backward(const TensorPtr& loss);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        const char* op;
        std::vector<TensorPtr> inputs;
        TensorPtr out;
        std::function<void()> back;
    };
    std::vector<Node> nodes_;

    TensorPtr emit(const char* op, std::vector<TensorPtr> inputs, TensorPtr out,
                   std::function<void()> back);
};

} // namespace mrhar

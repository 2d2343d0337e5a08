#pragma once
#include <string>
#include <vector>

#include "mrhar/checkpoint.hpp"
#include "mrhar/graph.hpp"

namespace mrhar {

// Weight matrices are stored (in x out) so a row vector maps through plain
// matmul; init is uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
TensorPtr init_matrix(int in, int out, Rng& rng, const std::string& name);
TensorPtr init_vector(int n, Rng& rng, int fan_in, const std::string& name);
TensorPtr zeros_param(Shape shape, const std::string& name);
TensorPtr const_param(Shape shape, double value, const std::string& name);

struct Embedding {
    TensorPtr weights; // vocab x dim
    int vocab = 0, dim = 0;

    Embedding() = default;
    Embedding(int vocab_size, int dim_, Rng& rng, const std::string& name);
    TensorPtr forward(Graph& g, const std::vector<int>& ids) const; // len x dim
    void collect(NamedParams& out) const { out.emplace_back(weights->name, weights); }
};

struct Linear {
    TensorPtr W; // in x out
    TensorPtr b; // out
    Linear() = default;
    Linear(int in, int out, Rng& rng, const std::string& name);
    // x: vector(in) -> vector(out), or matrix(T x in) -> matrix(T x out)
    TensorPtr forward(Graph& g, const TensorPtr& x) const;
    void collect(NamedParams& out) const;
};

// z = sigm(x Wz + h Uz + bz); r = sigm(x Wr + h Ur + br)
// h~ = tanh(x Wh + (r*h) Uh + bh); h' = (1-z)*h + z*h~
struct GruCell {
    TensorPtr Wz, Wr, Wh; // in x hidden
    TensorPtr Uz, Ur, Uh; // hidden x hidden
    TensorPtr bz, br, bh; // hidden
    int input_dim = 0, hidden_dim = 0;

    GruCell() = default;
    GruCell(int input_dim_, int hidden_dim_, Rng& rng, const std::string& name);
    TensorPtr step(Graph& g, const TensorPtr& x, const TensorPtr& h_prev) const;
    void collect(NamedParams& out) const;
};

struct BiGruOutput {
    TensorPtr outputs; // len x 2H, row k = concat(h_fwd[k], h_bwd[k])
    TensorPtr context; // 2H = concat(h_fwd[len-1], h_bwd[0])
};

// Both directions start from a zero hidden state.
BiGruOutput bigru_encode(Graph& g, const TensorPtr& x_seq, const GruCell& fwd, const GruCell& bwd);

struct AttentionResult {
    TensorPtr context; // key width
    TensorPtr weights; // one per key, sums to 1
};

// Additive attention: score_k = v . tanh(W q + U k_h + b), softmax over keys.
struct BahdanauAttention {
    TensorPtr W; // query_dim x attn_dim
    TensorPtr U; // key_dim x attn_dim
    TensorPtr b; // attn_dim
    TensorPtr v; // attn_dim

    BahdanauAttention() = default;
    BahdanauAttention(int query_dim, int key_dim, int attn_dim, Rng& rng, const std::string& name);
    AttentionResult attend(Graph& g, const TensorPtr& query, const TensorPtr& keys) const;
    // The key projection U*keys does not depend on the decoder step; callers that
    // attend repeatedly over fixed keys can precompute it once per sequence.
    TensorPtr project_keys(Graph& g, const TensorPtr& keys) const;
    AttentionResult attend_projected(Graph& g, const TensorPtr& query, const TensorPtr& keys,
                                     const TensorPtr& projected_keys) const;
    void collect(NamedParams& out) const;
};

// Pre-norm transformer decoder layer: label queries self-attend, cross-attend
// over sequence features, then pass through a position-wise FFN; residual
// connections around each sub-block.
struct TransformerDecoderLayer {
    int dim = 0, heads = 0, ffn_dim = 0;
    TensorPtr Wq_self, Wk_self, Wv_self, Wo_self; // dim x dim
    TensorPtr Wq_cross, Wk_cross, Wv_cross, Wo_cross;
    Linear ffn1, ffn2;
    TensorPtr ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;

    TransformerDecoderLayer() = default;
    TransformerDecoderLayer(int dim_, int heads_, int ffn_dim_, Rng& rng, const std::string& name);
    TensorPtr forward(Graph& g, const TensorPtr& labels, const TensorPtr& features,
                      double dropout_rate, Rng& rng, bool training) const;
    void collect(NamedParams& out) const;
};

// Scaled dot-product multi-head attention over already-projected inputs.
TensorPtr multi_head_attention(Graph& g, const TensorPtr& q_in, const TensorPtr& kv_in,
                               const TensorPtr& Wq, const TensorPtr& Wk, const TensorPtr& Wv,
                               const TensorPtr& Wo, int heads);

} // namespace mrhar

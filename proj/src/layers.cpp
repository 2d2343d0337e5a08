#include "mrhar/layers.hpp"

#include <cmath>

namespace mrhar {

TensorPtr init_matrix(int in, int out, Rng& rng, const std::string& name) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(static_cast<size_t>(in) * out);
    for (auto& x : w) x = rng.uniform(-bound, bound);
    auto t = make_tensor({in, out}, std::move(w), true);
    t->name = name;
    return t;
}

TensorPtr init_vector(int n, Rng& rng, int fan_in, const std::string& name) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(n);
    for (auto& x : w) x = rng.uniform(-bound, bound);
    auto t = make_tensor({n}, std::move(w), true);
    t->name = name;
    return t;
}

TensorPtr zeros_param(Shape shape, const std::string& name) {
    auto t = zeros(std::move(shape), true);
    t->name = name;
    return t;
}

TensorPtr const_param(Shape shape, double value, const std::string& name) {
    auto t = make_tensor(std::move(shape), std::vector<double>(numel_of(shape), value), true);
    t->name = name;
    return t;
}

// -- Embedding -----------------------------------------------------------

Embedding::Embedding(int vocab_size, int dim_, Rng& rng, const std::string& name)
    : vocab(vocab_size), dim(dim_) {
    // A lookup has no fan-in sum; scale rows by the output dimension.
    double bound = 1.0 / std::sqrt(static_cast<double>(dim_));
    std::vector<double> w(static_cast<size_t>(vocab_size) * dim_);
    for (auto& x : w) x = rng.uniform(-bound, bound);
    weights = make_tensor({vocab_size, dim_}, std::move(w), true);
    weights->name = name;
}

TensorPtr Embedding::forward(Graph& g, const std::vector<int>& ids) const {
    return g.embedding_lookup(weights, ids);
}

// -- Linear ----------------------------------------------------------------

Linear::Linear(int in, int out, Rng& rng, const std::string& name)
    : W(init_matrix(in, out, rng, name + ".W")), b(zeros_param({out}, name + ".b")) {}

TensorPtr Linear::forward(Graph& g, const TensorPtr& x) const {
    auto y = g.matmul(x, W);
    if (y->rank() == 2) return g.add_row_broadcast(y, b);
    return g.add(y, b);
}

void Linear::collect(NamedParams& out) const {
    out.emplace_back(W->name, W);
    out.emplace_back(b->name, b);
}

// -- GruCell ----------------------------------------------------------------

GruCell::GruCell(int input_dim_, int hidden_dim_, Rng& rng, const std::string& name)
    : Wz(init_matrix(input_dim_, hidden_dim_, rng, name + ".W_z")),
      Wr(init_matrix(input_dim_, hidden_dim_, rng, name + ".W_r")),
      Wh(init_matrix(input_dim_, hidden_dim_, rng, name + ".W_h")),
      Uz(init_matrix(hidden_dim_, hidden_dim_, rng, name + ".U_z")),
      Ur(init_matrix(hidden_dim_, hidden_dim_, rng, name + ".U_r")),
      Uh(init_matrix(hidden_dim_, hidden_dim_, rng, name + ".U_h")),
      bz(zeros_param({hidden_dim_}, name + ".b_z")),
      br(zeros_param({hidden_dim_}, name + ".b_r")),
      bh(zeros_param({hidden_dim_}, name + ".b_h")),
      input_dim(input_dim_), hidden_dim(hidden_dim_) {}

TensorPtr GruCell::step(Graph& g, const TensorPtr& x, const TensorPtr& h_prev) const {
    if (x->rank() != 1 || x->shape[0] != input_dim)
        throw ShapeError("gru_cell: input " + shape_str(x->shape) + ", expected [" +
                         std::to_string(input_dim) + "]");
    if (h_prev->rank() != 1 || h_prev->shape[0] != hidden_dim)
        throw ShapeError("gru_cell: hidden " + shape_str(h_prev->shape) + ", expected [" +
                         std::to_string(hidden_dim) + "]");
    return g.gru_step(x, h_prev, Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh);
}

void GruCell::collect(NamedParams& out) const {
    for (const auto& t : {Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh}) out.emplace_back(t->name, t);
}

// -- BiGRU -------------------------------------------------------------------

BiGruOutput bigru_encode(Graph& g, const TensorPtr& x_seq, const GruCell& fwd, const GruCell& bwd) {
    if (x_seq->rank() != 2 || x_seq->rows() < 1)
        throw ShapeError("bigru_encode: needs a non-empty len x D sequence, got " +
                         shape_str(x_seq->shape));
    int len = x_seq->rows();

    std::vector<TensorPtr> h_fwd(len), h_bwd(len);
    auto h = zeros({fwd.hidden_dim});
    for (int k = 0; k < len; ++k) {
        h = fwd.step(g, g.row(x_seq, k), h);
        h_fwd[k] = h;
    }
    h = zeros({bwd.hidden_dim});
    for (int k = len - 1; k >= 0; --k) {
        h = bwd.step(g, g.row(x_seq, k), h);
        h_bwd[k] = h;
    }

    std::vector<TensorPtr> rows(len);
    for (int k = 0; k < len; ++k) rows[k] = g.concat(h_fwd[k], h_bwd[k]);
    BiGruOutput out;
    out.outputs = g.stack_rows(rows);
    out.context = g.concat(h_fwd[len - 1], h_bwd[0]);
    return out;
}

// -- Bahdanau attention --------------------------------------------------------

BahdanauAttention::BahdanauAttention(int query_dim, int key_dim, int attn_dim, Rng& rng,
                                     const std::string& name)
    : W(init_matrix(query_dim, attn_dim, rng, name + ".W")),
      U(init_matrix(key_dim, attn_dim, rng, name + ".U")),
      b(zeros_param({attn_dim}, name + ".b")),
      v(init_vector(attn_dim, rng, attn_dim, name + ".v")) {}

TensorPtr BahdanauAttention::project_keys(Graph& g, const TensorPtr& keys) const {
    return g.matmul(keys, U); // len x attn
}

AttentionResult BahdanauAttention::attend_projected(Graph& g, const TensorPtr& query,
                                                    const TensorPtr& keys,
                                                    const TensorPtr& projected_keys) const {
    if (keys->rank() != 2 || keys->rows() < 1)
        throw ShapeError("bahdanau_attend: needs at least one key, got " + shape_str(keys->shape));
    auto step = g.additive_attention(query, keys, projected_keys, W, b, v);
    AttentionResult out;
    out.weights = step.weights;
    out.context = step.context;
    return out;
}

AttentionResult BahdanauAttention::attend(Graph& g, const TensorPtr& query,
                                          const TensorPtr& keys) const {
    return attend_projected(g, query, keys, project_keys(g, keys));
}

void BahdanauAttention::collect(NamedParams& out) const {
    for (const auto& t : {W, U, b, v}) out.emplace_back(t->name, t);
}

// -- Transformer decoder layer ---------------------------------------------------

TransformerDecoderLayer::TransformerDecoderLayer(int dim_, int heads_, int ffn_dim_, Rng& rng,
                                                 const std::string& name)
    : dim(dim_), heads(heads_), ffn_dim(ffn_dim_),
      Wq_self(init_matrix(dim_, dim_, rng, name + ".self.W_q")),
      Wk_self(init_matrix(dim_, dim_, rng, name + ".self.W_k")),
      Wv_self(init_matrix(dim_, dim_, rng, name + ".self.W_v")),
      Wo_self(init_matrix(dim_, dim_, rng, name + ".self.W_o")),
      Wq_cross(init_matrix(dim_, dim_, rng, name + ".cross.W_q")),
      Wk_cross(init_matrix(dim_, dim_, rng, name + ".cross.W_k")),
      Wv_cross(init_matrix(dim_, dim_, rng, name + ".cross.W_v")),
      Wo_cross(init_matrix(dim_, dim_, rng, name + ".cross.W_o")),
      ffn1(dim_, ffn_dim_, rng, name + ".ffn1"),
      ffn2(ffn_dim_, dim_, rng, name + ".ffn2"),
      ln1_g(const_param({dim_}, 1.0, name + ".ln1.g")), ln1_b(zeros_param({dim_}, name + ".ln1.b")),
      ln2_g(const_param({dim_}, 1.0, name + ".ln2.g")), ln2_b(zeros_param({dim_}, name + ".ln2.b")),
      ln3_g(const_param({dim_}, 1.0, name + ".ln3.g")), ln3_b(zeros_param({dim_}, name + ".ln3.b")) {
    if (dim_ % heads_ != 0)
        throw ConfigError("transformer_decoder_layer: heads " + std::to_string(heads_) +
                          " must divide model dim " + std::to_string(dim_));
}

TensorPtr multi_head_attention(Graph& g, const TensorPtr& q_in, const TensorPtr& kv_in,
                               const TensorPtr& Wq, const TensorPtr& Wk, const TensorPtr& Wv,
                               const TensorPtr& Wo, int heads) {
    int dim = Wq->cols();
    int dk = dim / heads;
    auto q = g.matmul(q_in, Wq);
    auto k = g.matmul(kv_in, Wk);
    auto v = g.matmul(kv_in, Wv);
    std::vector<TensorPtr> head_out(heads);
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    for (int h = 0; h < heads; ++h) {
        auto qh = g.slice_cols(q, h * dk, (h + 1) * dk);
        auto kh = g.slice_cols(k, h * dk, (h + 1) * dk);
        auto vh = g.slice_cols(v, h * dk, (h + 1) * dk);
        auto attn = g.softmax(g.scale(g.matmul_nt(qh, kh), inv_sqrt_dk));
        head_out[h] = g.matmul(attn, vh);
    }
    return g.matmul(g.concat_cols(head_out), Wo);
}

TensorPtr TransformerDecoderLayer::forward(Graph& g, const TensorPtr& labels,
                                           const TensorPtr& features, double dropout_rate,
                                           Rng& rng, bool training) const {
    if (labels->rank() != 2 || labels->rows() < 1)
        throw ShapeError("transformer_decoder_layer: needs at least one label row, got " +
                         shape_str(labels->shape));
    if (labels->cols() != dim || features->cols() != dim)
        throw ShapeError("transformer_decoder_layer: label width " +
                         std::to_string(labels->cols()) + " / feature width " +
                         std::to_string(features->cols()) + " vs model dim " + std::to_string(dim));

    auto x = labels;
    auto xn = g.layer_norm_rows(x, ln1_g, ln1_b);
    auto self_out = multi_head_attention(g, xn, xn, Wq_self, Wk_self, Wv_self, Wo_self, heads);
    x = g.add(x, g.dropout(self_out, dropout_rate, rng, training));

    auto cross_out = multi_head_attention(g, g.layer_norm_rows(x, ln2_g, ln2_b), features,
                                          Wq_cross, Wk_cross, Wv_cross, Wo_cross, heads);
    x = g.add(x, g.dropout(cross_out, dropout_rate, rng, training));

    auto ffn_out = ffn2.forward(g, g.relu(ffn1.forward(g, g.layer_norm_rows(x, ln3_g, ln3_b))));
    return g.add(x, g.dropout(ffn_out, dropout_rate, rng, training));
}

void TransformerDecoderLayer::collect(NamedParams& out) const {
    for (const auto& t : {Wq_self, Wk_self, Wv_self, Wo_self, Wq_cross, Wk_cross, Wv_cross, Wo_cross})
        out.emplace_back(t->name, t);
    ffn1.collect(out);
    ffn2.collect(out);
    for (const auto& t : {ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b}) out.emplace_back(t->name, t);
}

} // namespace mrhar

#include "mrhar/classifiers.hpp"

namespace mrhar {

TensorPtr soft_embed(Graph& g, const TensorPtr& prob_rows, const Embedding& embedding) {
    if (prob_rows->rank() != 2 || prob_rows->cols() != embedding.vocab)
        throw DataError("soft_embed: probability rows " + shape_str(prob_rows->shape) +
                        " misaligned with vocabulary of size " + std::to_string(embedding.vocab));
    return g.matmul(prob_rows, embedding.weights);
}

ClassifierModel::ClassifierModel(HeadKind kind_, int vocab_size_, int n_labels_,
                                 const ClassifierConfig& cfg_, Rng& rng)
    : kind(kind_), cfg(cfg_), vocab_size(vocab_size_), n_labels(n_labels_),
      feat_dim(2 * cfg_.hidden) {
    embedding = Embedding(vocab_size, cfg.embed, rng, "extractor.embedding");
    fwd = GruCell(cfg.embed, cfg.hidden, rng, "extractor.gru_fwd");
    bwd = GruCell(cfg.embed, cfg.hidden, rng, "extractor.gru_bwd");
    if (kind == HeadKind::BinaryRelevance) {
        bn_head = Linear(feat_dim, n_labels, rng, "bn_head");
    } else {
        label_embedding = Embedding(n_labels, feat_dim, rng, "q2l.label_embedding");
        int ffn = cfg.q2l_ffn > 0 ? cfg.q2l_ffn : 4 * feat_dim;
        for (int i = 0; i < cfg.q2l_layers; ++i)
            decoder.emplace_back(feat_dim, cfg.q2l_heads, ffn, rng,
                                 "q2l.layer" + std::to_string(i));
        q2l_W = init_matrix(n_labels, feat_dim, rng, "q2l.out.W");
        q2l_b = zeros_param({n_labels}, "q2l.out.b");
    }
}

NamedParams ClassifierModel::parameters() const {
    NamedParams out;
    embedding.collect(out);
    fwd.collect(out);
    bwd.collect(out);
    if (kind == HeadKind::BinaryRelevance) {
        bn_head.collect(out);
    } else {
        label_embedding.collect(out);
        for (const auto& layer : decoder) layer.collect(out);
        out.emplace_back(q2l_W->name, q2l_W);
        out.emplace_back(q2l_b->name, q2l_b);
    }
    return out;
}

std::vector<TensorPtr> ClassifierModel::parameter_tensors() const {
    std::vector<TensorPtr> out;
    for (auto& [name, t] : parameters()) out.push_back(t);
    return out;
}

TensorPtr ClassifierModel::forward_probs(Graph& g, const ClassifierInput& in, Rng& rng,
                                         bool training) const {
    TensorPtr emb;
    if (in.ids != nullptr) {
        if (in.ids->empty()) throw DataError("classifier: empty input sequence");
        emb = embedding.forward(g, *in.ids);
    } else if (in.soft_rows) {
        if (in.soft_rows->rows() < 1) throw DataError("classifier: empty input sequence");
        emb = soft_embed(g, in.soft_rows, embedding);
    } else {
        throw DataError("classifier: no input provided");
    }
    emb = g.dropout(emb, cfg.dropout, rng, training);
    auto enc = bigru_encode(g, emb, fwd, bwd);

    if (kind == HeadKind::BinaryRelevance) {
        auto feat = g.mean_over_rows(enc.outputs);
        return g.sigmoid(bn_head.forward(g, feat));
    }
    auto x = label_embedding.weights; // the label queries themselves
    for (const auto& layer : decoder)
        x = layer.forward(g, x, enc.outputs, cfg.dropout, rng, training);
    auto logits = g.add(g.rowwise_dot(x, q2l_W), q2l_b);
    return g.sigmoid(logits);
}

LabelPrediction ClassifierModel::predict(const ClassifierInput& in) const {
    Graph g;
    Rng rng(0); // eval mode: dropout is the identity
    auto probs = forward_probs(g, in, rng, false);
    LabelPrediction pred;
    pred.probs = probs->data;
    for (int l = 0; l < n_labels; ++l)
        if (pred.probs[l] > cfg.threshold) pred.predicted.push_back(l);
    return pred;
}

TensorPtr bce_loss(Graph& g, const TensorPtr& probs, const std::vector<uint8_t>& targets) {
    std::vector<double> t(targets.begin(), targets.end());
    int n = static_cast<int>(t.size());
    return g.bce_mean(probs, make_tensor({n}, std::move(t)));
}

LabelPrediction run_two_stage(const Seq2ResModel& sep, const ClassifierModel& cls,
                              const std::vector<int>& token_ids, int max_len) {
    auto gen = sep.generate(token_ids, max_len);
    ClassifierInput in;
    in.soft_rows = gen.prob_vectors;
    return cls.predict(in);
}

} // namespace mrhar

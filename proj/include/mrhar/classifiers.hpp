#pragma once
#include <vector>

#include "mrhar/layers.hpp"
#include "mrhar/seq2res.hpp"

namespace mrhar {

enum class HeadKind { BinaryRelevance, Query2Label };

struct ClassifierConfig {
    int embed = 128;
    int hidden = 128;      // BiGRU feature width is 2*hidden
    int q2l_layers = 2;
    int q2l_heads = 4;
    int q2l_ffn = 0;       // 0 -> 4 * feature width
    double dropout = 0.3;
    double threshold = 0.7;
};

struct LabelPrediction {
    std::vector<double> probs;    // length L, each in (0,1)
    std::vector<int> predicted;   // labels with prob > threshold, ascending
};

// Classifier input: either hard token ids or a row-stochastic matrix over the
// vocabulary (the separation model's per-step probability vectors).
struct ClassifierInput {
    const std::vector<int>* ids = nullptr;
    TensorPtr soft_rows;
};

// Expected embedding under each row's distribution: row t of the result is
// prob_rows[t] . embedding.weights. Linear in prob_rows; a one-hot row
// reproduces the plain lookup exactly.
TensorPtr soft_embed(Graph& g, const TensorPtr& prob_rows, const Embedding& embedding);

// BiGRU feature extractor with either a binary-relevance head (independent
// per-label affine maps on the time-mean feature) or a Query2Label head
// (label embeddings queried through a transformer decoder stack).
struct ClassifierModel {
    HeadKind kind = HeadKind::Query2Label;
    ClassifierConfig cfg;
    int vocab_size = 0;
    int n_labels = 0;
    int feat_dim = 0;

    Embedding embedding;
    GruCell fwd, bwd;
    Linear bn_head;                                // feat -> L
    Embedding label_embedding;                     // L x feat
    std::vector<TransformerDecoderLayer> decoder;
    TensorPtr q2l_W;                               // L x feat, per-label affine
    TensorPtr q2l_b;                               // L

    ClassifierModel() = default;
    ClassifierModel(HeadKind kind_, int vocab_size_, int n_labels_, const ClassifierConfig& cfg_,
                    Rng& rng);

    NamedParams parameters() const;
    std::vector<TensorPtr> parameter_tensors() const;

    // Per-label probabilities; the graph stays live for a loss + backward.
    TensorPtr forward_probs(Graph& g, const ClassifierInput& in, Rng& rng, bool training) const;
    // Eval-mode convenience: probabilities + thresholded label set.
    LabelPrediction predict(const ClassifierInput& in) const;
};

// Mean binary cross entropy between per-label probabilities and a 0/1 target
// vector (probabilities clamped at 1e-7 before the log).
TensorPtr bce_loss(Graph& g, const TensorPtr& probs, const std::vector<uint8_t>& targets);

// Frozen separation model generates; its probability rows replace the
// classifier's hard embedding via soft_embed.
LabelPrediction run_two_stage(const Seq2ResModel& sep, const ClassifierModel& cls,
                              const std::vector<int>& token_ids, int max_len);

} // namespace mrhar

#pragma once
#include <vector>

#include "mrhar/events.hpp"
#include "mrhar/layers.hpp"
#include "mrhar/vocab.hpp"

namespace mrhar {

// Token ids of the form {e1...} EOS SOS {e2...} EOS. Resident 1 is whoever
// triggered the first event of the input window; the second segment may be
// empty.
struct SeparationTarget {
    std::vector<int> tokens;

    // Throws DataError unless tokens match the required form.
    static SeparationTarget validate(std::vector<int> tokens);
    // Segment boundaries: [0, first_eos) and (sos, second_eos).
    std::vector<int> segment(int which) const;
};

// Stable partition of an annotated window into the two per-resident
// subsequences, serialized with the separator specials.
SeparationTarget make_separation_target(const std::vector<SensorEvent>& window,
                                        const Vocabulary& vocab);

struct Seq2ResConfig {
    int enc_embed = 128;
    int enc_hidden = 128;  // decoder hidden is 2*enc_hidden
    int dec_embed = 256;
    int attn_dim = 0;      // 0 -> decoder hidden size
    double dropout_enc = 0.1;
    double dropout_dec = 0.4;
};

// Encoder-decoder resident separation model: BiGRU encoder, additive
// attention, single GRU decoder emitting one unified separated sequence.
struct Seq2ResModel {
    Seq2ResConfig cfg;
    int vocab_size = 0;
    int dec_hidden = 0;

    Embedding enc_embedding, dec_embedding;
    GruCell enc_fwd, enc_bwd, dec_cell;
    BahdanauAttention attention;
    Linear out_proj;

    Seq2ResModel() = default;
    Seq2ResModel(int vocab_size_, const Seq2ResConfig& cfg_, Rng& rng);

    NamedParams parameters() const;
    std::vector<TensorPtr> parameter_tensors() const;

    struct TeacherResult {
        TensorPtr logits; // T x vocab
        TensorPtr loss;   // scalar, mean token cross entropy
        int correct = 0;  // argmax hits against the target
        int total = 0;
    };
    // Full teacher forcing: the decoder consumes SOS then the ground-truth
    // target prefix.
    TeacherResult forward_teacher(Graph& g, const std::vector<int>& input_ids,
                                  const SeparationTarget& target, Rng& rng, bool training) const;

    struct GenerateResult {
        std::vector<int> tokens;   // includes separators; ends at second EOS unless truncated
        TensorPtr prob_vectors;    // T x vocab, one distribution per emitted token
        bool truncated = false;    // max_len reached before the second EOS
    };
    // Greedy decoding; after the first generated EOS an SOS is force-fed (and
    // emitted with a one-hot probability row) to start the second segment.
    // Argmax ties break toward the lowest token id.
    GenerateResult generate(const std::vector<int>& input_ids, int max_len) const;
};

} // namespace mrhar

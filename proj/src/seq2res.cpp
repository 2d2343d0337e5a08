#include "mrhar/seq2res.hpp"

#include <algorithm>

namespace mrhar {

SeparationTarget SeparationTarget::validate(std::vector<int> tokens) {
    int n = static_cast<int>(tokens.size());
    if (n < 3) throw DataError("separation target: too short (" + std::to_string(n) + " tokens)");
    int eos_count = 0, sos_count = 0, first_eos = -1, sos_at = -1;
    for (int i = 0; i < n; ++i) {
        int t = tokens[i];
        if (t == Vocabulary::PAD)
            throw DataError("separation target: PAD at position " + std::to_string(i));
        if (t == Vocabulary::EOS) {
            if (first_eos < 0) first_eos = i;
            ++eos_count;
        } else if (t == Vocabulary::SOS) {
            sos_at = i;
            ++sos_count;
        }
    }
    if (eos_count != 2)
        throw DataError("separation target: expected exactly 2 EOS, got " +
                        std::to_string(eos_count));
    if (sos_count != 1)
        throw DataError("separation target: expected exactly 1 SOS, got " +
                        std::to_string(sos_count));
    if (tokens[n - 1] != Vocabulary::EOS)
        throw DataError("separation target: must end with EOS");
    if (sos_at != first_eos + 1)
        throw DataError("separation target: SOS must directly follow the first EOS");
    if (first_eos == 0) throw DataError("separation target: first segment is empty");
    SeparationTarget t;
    t.tokens = std::move(tokens);
    return t;
}

std::vector<int> SeparationTarget::segment(int which) const {
    int first_eos = static_cast<int>(std::find(tokens.begin(), tokens.end(), Vocabulary::EOS) -
                                     tokens.begin());
    if (which == 0) return {tokens.begin(), tokens.begin() + first_eos};
    return {tokens.begin() + first_eos + 2, tokens.end() - 1};
}

SeparationTarget make_separation_target(const std::vector<SensorEvent>& window,
                                        const Vocabulary& vocab) {
    if (window.empty()) throw DataError("separation target: empty window");
    std::vector<int> residents;
    for (const auto& e : window) {
        if (e.resident <= 0)
            throw DataError("separation target: event '" + e.token() + "' has no resident label");
        if (std::find(residents.begin(), residents.end(), e.resident) == residents.end())
            residents.push_back(e.resident);
    }
    if (residents.size() > 2)
        throw DataError("separation target: window involves " + std::to_string(residents.size()) +
                        " residents, at most 2 supported");

    int resident1 = window.front().resident; // trigger of the first event
    std::vector<int> tokens;
    tokens.reserve(window.size() + 3);
    for (const auto& e : window)
        if (e.resident == resident1) tokens.push_back(vocab.id_or_unk(e.token()));
    tokens.push_back(Vocabulary::EOS);
    tokens.push_back(Vocabulary::SOS);
    for (const auto& e : window)
        if (e.resident != resident1) tokens.push_back(vocab.id_or_unk(e.token()));
    tokens.push_back(Vocabulary::EOS);
    return SeparationTarget::validate(std::move(tokens));
}

// -- model -------------------------------------------------------------------

Seq2ResModel::Seq2ResModel(int vocab_size_, const Seq2ResConfig& cfg_, Rng& rng)
    : cfg(cfg_), vocab_size(vocab_size_), dec_hidden(2 * cfg_.enc_hidden) {
    int attn_dim = cfg.attn_dim > 0 ? cfg.attn_dim : dec_hidden;
    int enc_out = 2 * cfg.enc_hidden;
    enc_embedding = Embedding(vocab_size, cfg.enc_embed, rng, "encoder.embedding");
    enc_fwd = GruCell(cfg.enc_embed, cfg.enc_hidden, rng, "encoder.gru_fwd");
    enc_bwd = GruCell(cfg.enc_embed, cfg.enc_hidden, rng, "encoder.gru_bwd");
    dec_embedding = Embedding(vocab_size, cfg.dec_embed, rng, "decoder.embedding");
    // decoder input = embedded token + attention context
    dec_cell = GruCell(cfg.dec_embed + enc_out, dec_hidden, rng, "decoder.gru");
    attention = BahdanauAttention(dec_hidden, enc_out, attn_dim, rng, "attention");
    out_proj = Linear(dec_hidden, vocab_size, rng, "decoder.out_proj");
}

NamedParams Seq2ResModel::parameters() const {
    NamedParams out;
    enc_embedding.collect(out);
    enc_fwd.collect(out);
    enc_bwd.collect(out);
    dec_embedding.collect(out);
    dec_cell.collect(out);
    attention.collect(out);
    out_proj.collect(out);
    return out;
}

std::vector<TensorPtr> Seq2ResModel::parameter_tensors() const {
    std::vector<TensorPtr> out;
    for (auto& [name, t] : parameters()) out.push_back(t);
    return out;
}

Seq2ResModel::TeacherResult Seq2ResModel::forward_teacher(Graph& g,
                                                          const std::vector<int>& input_ids,
                                                          const SeparationTarget& target,
                                                          Rng& rng, bool training) const {
    if (input_ids.empty()) throw DataError("seq2res: empty input sequence");
    SeparationTarget::validate(target.tokens); // malformed-target error

    auto emb = g.dropout(enc_embedding.forward(g, input_ids), cfg.dropout_enc, rng, training);
    auto enc = bigru_encode(g, emb, enc_fwd, enc_bwd);
    auto keys_proj = attention.project_keys(g, enc.outputs);

    int steps = static_cast<int>(target.tokens.size());
    std::vector<int> dec_inputs(steps);
    dec_inputs[0] = Vocabulary::SOS;
    for (int t = 1; t < steps; ++t) dec_inputs[t] = target.tokens[t - 1];

    auto dec_emb = g.dropout(dec_embedding.forward(g, dec_inputs), cfg.dropout_dec, rng, training);
    auto h = enc.context;
    std::vector<TensorPtr> hidden(steps);
    for (int t = 0; t < steps; ++t) {
        auto att = attention.attend_projected(g, h, enc.outputs, keys_proj);
        auto x = g.concat(g.row(dec_emb, t), att.context);
        h = dec_cell.step(g, x, h);
        hidden[t] = h;
    }

    TeacherResult res;
    res.logits = out_proj.forward(g, g.stack_rows(hidden));
    res.loss = g.cross_entropy_rows(res.logits, target.tokens);
    res.total = steps;
    for (int t = 0; t < steps; ++t) {
        const double* row = &res.logits->data[static_cast<size_t>(t) * vocab_size];
        int best = 0;
        for (int j = 1; j < vocab_size; ++j)
            if (row[j] > row[best]) best = j;
        if (best == target.tokens[t]) res.correct++;
    }
    return res;
}

Seq2ResModel::GenerateResult Seq2ResModel::generate(const std::vector<int>& input_ids,
                                                    int max_len) const {
    if (input_ids.empty()) throw DataError("seq2res: empty input sequence");
    if (max_len < 3) throw ConfigError("seq2res: max_len must be at least 3");

    Graph g; // eval mode: no dropout anywhere on this path
    auto emb = enc_embedding.forward(g, input_ids);
    auto enc = bigru_encode(g, emb, enc_fwd, enc_bwd);
    auto keys_proj = attention.project_keys(g, enc.outputs);

    GenerateResult res;
    std::vector<double> prob_rows;
    prob_rows.reserve(static_cast<size_t>(max_len) * vocab_size);

    auto h = enc.context;
    int prev = Vocabulary::SOS;
    int eos_seen = 0;
    while (static_cast<int>(res.tokens.size()) < max_len) {
        auto att = attention.attend_projected(g, h, enc.outputs, keys_proj);
        auto x = g.concat(g.row(dec_embedding.forward(g, {prev}), 0), att.context);
        h = dec_cell.step(g, x, h);
        auto probs = g.softmax(out_proj.forward(g, h));

        int best = 0;
        for (int j = 1; j < vocab_size; ++j)
            if (probs->data[j] > probs->data[best]) best = j; // ties keep the lowest id
        res.tokens.push_back(best);
        prob_rows.insert(prob_rows.end(), probs->data.begin(), probs->data.end());

        if (best == Vocabulary::EOS) {
            ++eos_seen;
            if (eos_seen == 2) break;
            // prompt the second segment: force-feed SOS and emit it one-hot
            if (static_cast<int>(res.tokens.size()) < max_len) {
                res.tokens.push_back(Vocabulary::SOS);
                std::vector<double> onehot(vocab_size, 0.0);
                onehot[Vocabulary::SOS] = 1.0;
                prob_rows.insert(prob_rows.end(), onehot.begin(), onehot.end());
            }
            prev = Vocabulary::SOS;
        } else {
            prev = best;
        }
    }

    res.truncated = eos_seen < 2;
    res.prob_vectors =
        make_tensor({static_cast<int>(res.tokens.size()), vocab_size}, std::move(prob_rows));
    return res;
}

} // namespace mrhar

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "mrhar/optim.hpp"
#include "mrhar/seq2res.hpp"
#include "support.hpp"

using namespace mrhar;

namespace {

SensorEvent ev(const std::string& sensor, int resident) {
    SensorEvent e;
    e.sensor = sensor;
    e.value = "ON";
    e.resident = resident;
    e.activity = 0;
    return e;
}

Vocabulary toy_vocab() {
    std::vector<SensorEvent> evs;
    for (const char* s : {"A", "B", "C", "D", "E", "F"}) evs.push_back(ev(s, 1));
    return Vocabulary::build(evs);
}

Seq2ResConfig tiny_cfg() {
    Seq2ResConfig cfg;
    cfg.enc_embed = 6;
    cfg.enc_hidden = 5;
    cfg.dec_embed = 8;
    cfg.dropout_enc = 0.0;
    cfg.dropout_dec = 0.0;
    return cfg;
}

} // namespace

TEST_CASE("separation target partitions by resident preserving order") {
    auto vocab = toy_vocab();
    std::vector<SensorEvent> window = {ev("A", 1), ev("B", 2), ev("C", 1)};
    auto target = make_separation_target(window, vocab);
    std::vector<int> expect = {vocab.id_or_unk("A:ON"), vocab.id_or_unk("C:ON"), Vocabulary::EOS,
                               Vocabulary::SOS, vocab.id_or_unk("B:ON"), Vocabulary::EOS};
    CHECK(target.tokens == expect);
}

TEST_CASE("single-resident window yields an empty second segment") {
    auto vocab = toy_vocab();
    std::vector<SensorEvent> window = {ev("A", 2), ev("B", 2)};
    auto target = make_separation_target(window, vocab);
    std::vector<int> expect = {vocab.id_or_unk("A:ON"), vocab.id_or_unk("B:ON"), Vocabulary::EOS,
                               Vocabulary::SOS, Vocabulary::EOS};
    CHECK(target.tokens == expect);
    CHECK(target.segment(1).empty());
}

TEST_CASE("separation target rejects bad windows") {
    auto vocab = toy_vocab();
    std::vector<SensorEvent> three = {ev("A", 1), ev("B", 2), ev("C", 3)};
    CHECK_THROWS_AS(make_separation_target(three, vocab), DataError);

    std::vector<SensorEvent> unlabeled = {ev("A", 1)};
    unlabeled.push_back(ev("B", 0)); // missing annotation
    CHECK_THROWS_AS(make_separation_target(unlabeled, vocab), DataError);
}

TEST_CASE("random windows give order-preserving multiset partitions") {
    auto vocab = toy_vocab();
    Rng rng(77);
    const char* sensors[6] = {"A", "B", "C", "D", "E", "F"};
    for (int trial = 0; trial < 200; ++trial) {
        int len = 1 + static_cast<int>(rng.index(16));
        std::vector<SensorEvent> window;
        for (int i = 0; i < len; ++i)
            window.push_back(ev(sensors[rng.index(6)], 1 + static_cast<int>(rng.index(2))));
        auto target = make_separation_target(window, vocab);

        // multiset equality of segment union vs the window
        std::multiset<int> from_target, from_window;
        for (int t : target.segment(0)) from_target.insert(t);
        for (int t : target.segment(1)) from_target.insert(t);
        for (const auto& e : window) from_window.insert(vocab.id_or_unk(e.token()));
        CHECK(from_target == from_window);

        // order within each segment follows the window
        int resident1 = window.front().resident;
        std::vector<int> expect1, expect2;
        for (const auto& e : window)
            (e.resident == resident1 ? expect1 : expect2).push_back(vocab.id_or_unk(e.token()));
        CHECK(target.segment(0) == expect1);
        CHECK(target.segment(1) == expect2);
    }
}

TEST_CASE("target validation rejects malformed shapes") {
    CHECK_THROWS_AS(SeparationTarget::validate({Vocabulary::EOS, Vocabulary::SOS, Vocabulary::EOS}),
                    DataError); // empty first segment
    CHECK_THROWS_AS(SeparationTarget::validate({5, Vocabulary::EOS, 6, Vocabulary::EOS}),
                    DataError); // missing SOS
    CHECK_THROWS_AS(SeparationTarget::validate({5, Vocabulary::EOS, Vocabulary::SOS, 6}),
                    DataError); // missing trailing EOS
    CHECK_THROWS_AS(SeparationTarget::validate({5, Vocabulary::PAD, Vocabulary::EOS,
                                                Vocabulary::SOS, Vocabulary::EOS}),
                    DataError); // PAD inside
}

TEST_CASE("uniform logits give a teacher-forced loss of ln(vocab)") {
    auto vocab = toy_vocab();
    Rng rng(5);
    Seq2ResModel model(vocab.size(), tiny_cfg(), rng);
    // zero output projection -> identical logits -> uniform softmax
    std::fill(model.out_proj.W->data.begin(), model.out_proj.W->data.end(), 0.0);
    std::fill(model.out_proj.b->data.begin(), model.out_proj.b->data.end(), 0.0);

    auto target = SeparationTarget::validate({4, 5, Vocabulary::EOS, Vocabulary::SOS, 6,
                                              Vocabulary::EOS});
    Graph g;
    Rng drng(0);
    auto res = model.forward_teacher(g, {4, 5, 6}, target, drng, false);
    CHECK(res.loss->data[0] == doctest::Approx(std::log(vocab.size())).epsilon(1e-12));
}

TEST_CASE("one-hot logits drive the loss toward zero") {
    auto vocab = toy_vocab();
    Rng rng(6);
    Seq2ResModel model(vocab.size(), tiny_cfg(), rng);
    auto target = SeparationTarget::validate({4, Vocabulary::EOS, Vocabulary::SOS, 5,
                                              Vocabulary::EOS});
    // bias the output layer hugely toward each target token in turn is not
    // possible per step; instead check the analytic bound with a margin bias
    // on a single-token vocabulary pattern: loss under a large correct-class
    // margin must be tiny.
    Graph g;
    Rng drng(0);
    auto res = model.forward_teacher(g, {4, 5}, target, drng, false);

    // hand-build logits with a +40 margin on the target and recompute CE
    std::vector<double> margin_logits(res.logits->data.size(), 0.0);
    for (int t = 0; t < res.logits->rows(); ++t)
        margin_logits[t * vocab.size() + target.tokens[t]] = 40.0;
    Graph g2;
    auto ce = g2.cross_entropy_rows(make_tensor(res.logits->shape, margin_logits), target.tokens);
    CHECK(ce->data[0] < 1e-12);
}

TEST_CASE("teacher-forced loss matches a hand softmax cross entropy") {
    auto vocab = toy_vocab();
    Rng rng(7);
    Seq2ResModel model(vocab.size(), tiny_cfg(), rng);
    auto target = SeparationTarget::validate({4, 6, Vocabulary::EOS, Vocabulary::SOS, 5,
                                              Vocabulary::EOS});
    Graph g;
    Rng drng(0);
    auto res = model.forward_teacher(g, {4, 6, 5}, target, drng, false);

    double hand = 0;
    int v = vocab.size();
    for (int t = 0; t < res.logits->rows(); ++t) {
        const double* row = &res.logits->data[static_cast<size_t>(t) * v];
        double mx = *std::max_element(row, row + v);
        double z = 0;
        for (int j = 0; j < v; ++j) z += std::exp(row[j] - mx);
        hand += mx + std::log(z) - row[target.tokens[t]];
    }
    hand /= res.logits->rows();
    CHECK(std::fabs(res.loss->data[0] - hand) < 1e-10);
}

TEST_CASE("teacher forcing rejects malformed targets") {
    auto vocab = toy_vocab();
    Rng rng(8);
    Seq2ResModel model(vocab.size(), tiny_cfg(), rng);
    SeparationTarget bad;
    bad.tokens = {4, 5, 6}; // no specials at all
    Graph g;
    Rng drng(0);
    CHECK_THROWS_AS(model.forward_teacher(g, {4}, bad, drng, false), DataError);
}

TEST_CASE("generation emits valid probability rows and respects max_len") {
    auto vocab = toy_vocab();
    Rng rng(9);
    Seq2ResModel model(vocab.size(), tiny_cfg(), rng);
    auto gen = model.generate({4, 5, 6, 4}, 7);
    CHECK(static_cast<int>(gen.tokens.size()) <= 7);
    REQUIRE(gen.prob_vectors->rows() == static_cast<int>(gen.tokens.size()));
    for (int t = 0; t < gen.prob_vectors->rows(); ++t) {
        double sum = 0;
        for (int j = 0; j < vocab.size(); ++j) sum += gen.prob_vectors->at(t, j);
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
    // structural invariants: at most two EOS, nothing after the second
    int eos = 0;
    for (size_t i = 0; i < gen.tokens.size(); ++i) {
        if (gen.tokens[i] == Vocabulary::EOS) {
            ++eos;
            if (eos == 2) CHECK(i + 1 == gen.tokens.size());
        }
    }
    CHECK(eos <= 2);
    if (eos < 2) CHECK(gen.truncated);
    CHECK_THROWS_AS(model.generate({4}, 2), ConfigError);
}

TEST_CASE("a model overfit on one pair reproduces the training target") {
    auto vocab = toy_vocab();
    Rng rng(10);
    Seq2ResConfig cfg = tiny_cfg();
    Seq2ResModel model(vocab.size(), cfg, rng);

    std::vector<int> input = {4, 5, 6};
    auto target = SeparationTarget::validate({4, 6, Vocabulary::EOS, Vocabulary::SOS, 5,
                                              Vocabulary::EOS});

    auto params = model.parameter_tensors();
    AdamState st(params, 0.01);
    Rng drng(0);
    double last_loss = 1e9;
    for (int step = 0; step < 1200; ++step) {
        Graph g;
        auto res = model.forward_teacher(g, input, target, drng, false);
        last_loss = res.loss->data[0];
        if (last_loss < 1e-4) break;
        g.backward(res.loss);
        adam_step(params, st);
    }
    CHECK(last_loss < 1e-3);

    auto gen = model.generate(input, 19);
    CHECK(gen.tokens == target.tokens);
    CHECK_FALSE(gen.truncated);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mrhar/layers.hpp"
#include "support.hpp"

using namespace mrhar;

namespace {

// plain-double reference helpers, kept independent of the Graph path
std::vector<double> ref_vecmat(const std::vector<double>& x, const TensorPtr& W) {
    std::vector<double> y(W->cols(), 0.0);
    for (int i = 0; i < W->rows(); ++i)
        for (int j = 0; j < W->cols(); ++j) y[j] += x[i] * W->at(i, j);
    return y;
}

std::vector<double> ref_softmax(std::vector<double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double z = 0;
    for (auto& x : v) {
        x = std::exp(x - mx);
        z += x;
    }
    for (auto& x : v) x /= z;
    return v;
}

double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> ref_gru_step(const GruCell& cell, const std::vector<double>& x,
                                 const std::vector<double>& h) {
    int n = cell.hidden_dim;
    auto xz = ref_vecmat(x, cell.Wz), hz = ref_vecmat(h, cell.Uz);
    auto xr = ref_vecmat(x, cell.Wr), hr = ref_vecmat(h, cell.Ur);
    std::vector<double> z(n), r(n), out(n);
    for (int i = 0; i < n; ++i) {
        z[i] = ref_sigmoid(xz[i] + hz[i] + cell.bz->data[i]);
        r[i] = ref_sigmoid(xr[i] + hr[i] + cell.br->data[i]);
    }
    std::vector<double> rh(n);
    for (int i = 0; i < n; ++i) rh[i] = r[i] * h[i];
    auto xh = ref_vecmat(x, cell.Wh), hh = ref_vecmat(rh, cell.Uh);
    for (int i = 0; i < n; ++i) {
        double cand = std::tanh(xh[i] + hh[i] + cell.bh->data[i]);
        out[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
    }
    return out;
}

std::vector<double> rand_vec(int n, Rng& rng, double bound = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return v;
}

} // namespace

TEST_CASE("embedding lookup returns exact table rows") {
    Rng rng(1);
    Embedding table(2, 3, rng, "emb");
    Graph g;
    auto out = table.forward(g, {0});
    REQUIRE(out->shape == Shape{1, 3});
    for (int j = 0; j < 3; ++j) CHECK(out->at(0, j) == table.weights->at(0, j));

    auto two = table.forward(g, {1, 1});
    for (int j = 0; j < 3; ++j) CHECK(two->at(0, j) == two->at(1, j));
}

TEST_CASE("embedding rejects out-of-vocabulary ids") {
    Rng rng(1);
    Embedding table(2, 3, rng, "emb");
    Graph g;
    CHECK_THROWS_AS(table.forward(g, {2}), DataError);
}

TEST_CASE("embedding gradient is one exactly at looked-up rows") {
    Rng rng(2);
    Embedding table(4, 3, rng, "emb");
    Graph g;
    auto out = table.forward(g, {1, 3});
    auto loss = g.scale(g.mean_all(out), 6.0); // sum of the 6 entries
    g.backward(loss);
    for (int v = 0; v < 4; ++v)
        for (int j = 0; j < 3; ++j) {
            double expect = (v == 1 || v == 3) ? 1.0 : 0.0;
            CHECK(table.weights->grad[v * 3 + j] == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("gru cell with zero weights and zero hidden stays zero") {
    Rng rng(3);
    GruCell cell(3, 4, rng, "cell");
    for (auto& t : {cell.Wz, cell.Wr, cell.Wh, cell.Uz, cell.Ur, cell.Uh})
        std::fill(t->data.begin(), t->data.end(), 0.0);
    Graph g;
    auto h = cell.step(g, make_tensor({3}, {0.5, -1.0, 2.0}), zeros({4}));
    for (double v : h->data) CHECK(v == 0.0);
}

TEST_CASE("saturated update gate hands the state to the candidate") {
    Rng rng(4);
    GruCell cell(3, 4, rng, "cell");
    std::fill(cell.bz->data.begin(), cell.bz->data.end(), 50.0); // z ~ 1
    Graph g;
    auto x = make_tensor({3}, rand_vec(3, rng));
    auto h_prev = make_tensor({4}, rand_vec(4, rng));
    auto h = cell.step(g, x, h_prev);

    // candidate with z==1: h' = h~ exactly
    std::vector<double> rh(4);
    auto xr = ref_vecmat(x->data, cell.Wr), hr = ref_vecmat(h_prev->data, cell.Ur);
    for (int i = 0; i < 4; ++i)
        rh[i] = ref_sigmoid(xr[i] + hr[i] + cell.br->data[i]) * h_prev->data[i];
    auto xh = ref_vecmat(x->data, cell.Wh), hh = ref_vecmat(rh, cell.Uh);
    for (int i = 0; i < 4; ++i)
        CHECK(h->data[i] == doctest::Approx(std::tanh(xh[i] + hh[i] + cell.bh->data[i])).epsilon(1e-9));
}

TEST_CASE("gru cell matches the reference formula trace") {
    Rng rng(5);
    GruCell cell(4, 4, rng, "cell");
    Graph g;
    auto x = make_tensor({4}, rand_vec(4, rng));
    auto h_prev = make_tensor({4}, rand_vec(4, rng));
    auto h = cell.step(g, x, h_prev);
    auto ref = ref_gru_step(cell, x->data, h_prev->data);
    for (int i = 0; i < 4; ++i) CHECK(std::fabs(h->data[i] - ref[i]) < 1e-12);
}

TEST_CASE("gru cell output stays in (-1,1) when the previous hidden does") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        GruCell cell(3, 5, rng, "cell");
        Graph g;
        auto x = make_tensor({3}, rand_vec(3, rng, 10.0));
        auto h_prev = make_tensor({5}, rand_vec(5, rng, 0.999));
        auto h = cell.step(g, x, h_prev);
        for (double v : h->data) {
            CHECK(v > -1.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("bigru with a single step has outputs equal to context") {
    Rng rng(7);
    GruCell fwd(3, 4, rng, "fwd"), bwd(3, 4, rng, "bwd");
    Graph g;
    auto x = make_tensor({1, 3}, rand_vec(3, rng));
    auto enc = bigru_encode(g, x, fwd, bwd);
    REQUIRE(enc.outputs->shape == Shape{1, 8});
    for (int j = 0; j < 8; ++j) CHECK(enc.outputs->at(0, j) == enc.context->data[j]);
}

TEST_CASE("bigru rejects an empty sequence") {
    Rng rng(7);
    GruCell fwd(3, 4, rng, "fwd"), bwd(3, 4, rng, "bwd");
    Graph g;
    CHECK_THROWS_AS(bigru_encode(g, make_tensor({}, {0.0}), fwd, bwd), ShapeError);
}

TEST_CASE("bigru equals sequential gru steps per direction") {
    Rng rng(8);
    GruCell fwd(3, 4, rng, "fwd"), bwd(3, 4, rng, "bwd");
    int len = 5;
    std::vector<double> data = rand_vec(len * 3, rng);
    Graph g;
    auto x = make_tensor({len, 3}, data);
    auto enc = bigru_encode(g, x, fwd, bwd);

    std::vector<double> h_f(4, 0.0), h_b(4, 0.0);
    std::vector<std::vector<double>> fwd_states, bwd_states(len);
    for (int k = 0; k < len; ++k) {
        std::vector<double> xk(data.begin() + k * 3, data.begin() + (k + 1) * 3);
        h_f = ref_gru_step(fwd, xk, h_f);
        fwd_states.push_back(h_f);
    }
    for (int k = len - 1; k >= 0; --k) {
        std::vector<double> xk(data.begin() + k * 3, data.begin() + (k + 1) * 3);
        h_b = ref_gru_step(bwd, xk, h_b);
        bwd_states[k] = h_b;
    }
    for (int k = 0; k < len; ++k)
        for (int j = 0; j < 8; ++j) {
            double expect = j < 4 ? fwd_states[k][j] : bwd_states[k][j - 4];
            CHECK(std::fabs(enc.outputs->at(k, j) - expect) < 1e-12);
        }
}

TEST_CASE("reversing the sequence swaps the fwd and bwd halves under swapped params") {
    Rng rng(9);
    GruCell a(3, 4, rng, "a"), b(3, 4, rng, "b");
    int len = 4;
    auto data = rand_vec(len * 3, rng);
    std::vector<double> reversed(len * 3);
    for (int k = 0; k < len; ++k)
        std::copy(data.begin() + k * 3, data.begin() + (k + 1) * 3,
                  reversed.begin() + (len - 1 - k) * 3);

    Graph g;
    auto enc1 = bigru_encode(g, make_tensor({len, 3}, data), a, b);
    auto enc2 = bigru_encode(g, make_tensor({len, 3}, reversed), b, a);
    for (int k = 0; k < len; ++k)
        for (int j = 0; j < 4; ++j) {
            CHECK(enc1.outputs->at(k, j) ==
                  doctest::Approx(enc2.outputs->at(len - 1 - k, 4 + j)).epsilon(1e-12));
            CHECK(enc1.outputs->at(k, 4 + j) ==
                  doctest::Approx(enc2.outputs->at(len - 1 - k, j)).epsilon(1e-12));
        }
}

TEST_CASE("encoder output width is twice the hidden size") {
    Rng rng(10);
    GruCell fwd(8, 128, rng, "fwd"), bwd(8, 128, rng, "bwd");
    Graph g;
    auto enc = bigru_encode(g, make_tensor({2, 8}, rand_vec(16, rng)), fwd, bwd);
    CHECK(enc.outputs->cols() == 256);
    CHECK(enc.context->shape[0] == 256);
}

TEST_CASE("attention over a single key copies that key") {
    Rng rng(11);
    BahdanauAttention attn(4, 6, 5, rng, "attn");
    Graph g;
    auto keys = make_tensor({1, 6}, rand_vec(6, rng));
    auto res = attn.attend(g, make_tensor({4}, rand_vec(4, rng)), keys);
    CHECK(res.weights->data[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int j = 0; j < 6; ++j) CHECK(res.context->data[j] == doctest::Approx(keys->at(0, j)));
}

TEST_CASE("zero score vector gives uniform weights and the mean context") {
    Rng rng(12);
    BahdanauAttention attn(4, 6, 5, rng, "attn");
    std::fill(attn.v->data.begin(), attn.v->data.end(), 0.0);
    Graph g;
    auto keys = make_tensor({3, 6}, rand_vec(18, rng));
    auto res = attn.attend(g, make_tensor({4}, rand_vec(4, rng)), keys);
    for (int k = 0; k < 3; ++k) CHECK(res.weights->data[k] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    for (int j = 0; j < 6; ++j) {
        double mean = (keys->at(0, j) + keys->at(1, j) + keys->at(2, j)) / 3.0;
        CHECK(res.context->data[j] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("attention matches direct evaluation of the score formula") {
    Rng rng(13);
    BahdanauAttention attn(4, 6, 5, rng, "attn");
    Graph g;
    auto query = make_tensor({4}, rand_vec(4, rng));
    auto keys = make_tensor({3, 6}, rand_vec(18, rng));
    auto res = attn.attend(g, query, keys);

    auto qw = ref_vecmat(query->data, attn.W);
    std::vector<double> scores(3);
    for (int k = 0; k < 3; ++k) {
        std::vector<double> key(keys->data.begin() + k * 6, keys->data.begin() + (k + 1) * 6);
        auto ku = ref_vecmat(key, attn.U);
        double s = 0;
        for (int j = 0; j < 5; ++j)
            s += attn.v->data[j] * std::tanh(qw[j] + ku[j] + attn.b->data[j]);
        scores[k] = s;
    }
    auto w = ref_softmax(scores);
    double sum = 0;
    for (int k = 0; k < 3; ++k) {
        CHECK(std::fabs(res.weights->data[k] - w[k]) < 1e-12);
        CHECK(res.weights->data[k] >= 0.0);
        sum += res.weights->data[k];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
    for (int j = 0; j < 6; ++j) {
        double c = 0;
        for (int k = 0; k < 3; ++k) c += w[k] * keys->at(k, j);
        CHECK(std::fabs(res.context->data[j] - c) < 1e-12);
    }
}

TEST_CASE("attention rejects empty keys") {
    Rng rng(13);
    BahdanauAttention attn(4, 6, 5, rng, "attn");
    Graph g;
    auto empty = zeros({0, 6});
    CHECK_THROWS_AS(attn.attend(g, make_tensor({4}, rand_vec(4, rng)), empty), ShapeError);
}

TEST_CASE("decoder layer with identical feature rows ignores cross-attention weights") {
    Rng rng(14);
    TransformerDecoderLayer layer(8, 2, 16, rng, "layer");
    Rng drop(0);
    std::vector<double> one_row = rand_vec(8, rng);
    std::vector<double> feats;
    for (int i = 0; i < 5; ++i) feats.insert(feats.end(), one_row.begin(), one_row.end());

    Graph g;
    auto labels = make_tensor({2, 8}, rand_vec(16, rng));
    auto out1 = layer.forward(g, labels, make_tensor({5, 8}, feats), 0.0, drop, false);
    // any convex combination of equal rows is that row, so 1 copy behaves identically
    auto out2 = layer.forward(g, labels, make_tensor({1, 8}, one_row), 0.0, drop, false);
    for (size_t i = 0; i < out1->data.size(); ++i)
        CHECK(out1->data[i] == doctest::Approx(out2->data[i]).epsilon(1e-12));
}

TEST_CASE("decoder layer matches a single-head hand trace") {
    Rng rng(15);
    int d = 4;
    TransformerDecoderLayer layer(d, 1, 8, rng, "layer");
    Rng drop(0);
    Graph g;
    auto labels = make_tensor({2, d}, rand_vec(2 * d, rng));
    auto feats = make_tensor({3, d}, rand_vec(3 * d, rng));
    auto out = layer.forward(g, labels, feats, 0.0, drop, false);

    // reference: pre-norm self attention, cross attention, ffn, residuals
    auto layer_norm = [&](const std::vector<double>& row, const TensorPtr& gamma,
                          const TensorPtr& beta) {
        double mu = 0, var = 0;
        for (double v : row) mu += v;
        mu /= row.size();
        for (double v : row) var += (v - mu) * (v - mu);
        var /= row.size();
        std::vector<double> out_row(row.size());
        for (size_t j = 0; j < row.size(); ++j)
            out_row[j] = gamma->data[j] * (row[j] - mu) / std::sqrt(var + 1e-5) + beta->data[j];
        return out_row;
    };
    auto rows_of = [&](const TensorPtr& m) {
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < m->rows(); ++i)
            rows.emplace_back(m->data.begin() + i * m->cols(), m->data.begin() + (i + 1) * m->cols());
        return rows;
    };
    auto attention = [&](const std::vector<std::vector<double>>& q_rows,
                         const std::vector<std::vector<double>>& kv_rows, const TensorPtr& Wq,
                         const TensorPtr& Wk, const TensorPtr& Wv, const TensorPtr& Wo) {
        std::vector<std::vector<double>> out_rows;
        for (const auto& q : q_rows) {
            auto qh = ref_vecmat(q, Wq);
            std::vector<double> scores;
            for (const auto& kv : kv_rows) {
                auto kh = ref_vecmat(kv, Wk);
                double s = 0;
                for (int j = 0; j < d; ++j) s += qh[j] * kh[j];
                scores.push_back(s / std::sqrt(static_cast<double>(d)));
            }
            auto w = ref_softmax(scores);
            std::vector<double> ctx(d, 0.0);
            for (size_t k = 0; k < kv_rows.size(); ++k) {
                auto vh = ref_vecmat(kv_rows[k], Wv);
                for (int j = 0; j < d; ++j) ctx[j] += w[k] * vh[j];
            }
            out_rows.push_back(ref_vecmat(ctx, Wo));
        }
        return out_rows;
    };

    auto x = rows_of(labels);
    std::vector<std::vector<double>> xn;
    for (auto& row : x) xn.push_back(layer_norm(row, layer.ln1_g, layer.ln1_b));
    auto self_out = attention(xn, xn, layer.Wq_self, layer.Wk_self, layer.Wv_self, layer.Wo_self);
    for (size_t i = 0; i < x.size(); ++i)
        for (int j = 0; j < d; ++j) x[i][j] += self_out[i][j];

    std::vector<std::vector<double>> x2n;
    for (auto& row : x) x2n.push_back(layer_norm(row, layer.ln2_g, layer.ln2_b));
    auto cross_out =
        attention(x2n, rows_of(feats), layer.Wq_cross, layer.Wk_cross, layer.Wv_cross, layer.Wo_cross);
    for (size_t i = 0; i < x.size(); ++i)
        for (int j = 0; j < d; ++j) x[i][j] += cross_out[i][j];

    for (size_t i = 0; i < x.size(); ++i) {
        auto norm = layer_norm(x[i], layer.ln3_g, layer.ln3_b);
        auto hidden = ref_vecmat(norm, layer.ffn1.W);
        for (size_t j = 0; j < hidden.size(); ++j)
            hidden[j] = std::max(0.0, hidden[j] + layer.ffn1.b->data[j]);
        auto ff = ref_vecmat(hidden, layer.ffn2.W);
        for (int j = 0; j < d; ++j) x[i][j] += ff[j] + layer.ffn2.b->data[j];
    }

    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < d; ++j) CHECK(std::fabs(out->at(i, j) - x[i][j]) < 1e-10);
}

TEST_CASE("decoder layer enforces head divisibility") {
    Rng rng(16);
    CHECK_THROWS_AS(TransformerDecoderLayer(6, 4, 8, rng, "layer"), ConfigError);
}

TEST_CASE("a composite of every layer passes a finite-difference gradient check") {
    // toy dims; the acceptance suite runs the per-layer 20-seed sweep
    for (uint64_t seed : {3ull, 17ull}) {
        Rng rng(seed);
        Rng drop(0);

        Embedding emb(5, 4, rng, "emb");
        GruCell cell(4, 4, rng, "cell");
        GruCell bwd(4, 4, rng, "bwd");
        BahdanauAttention attn(8, 8, 4, rng, "attn");
        TransformerDecoderLayer tdl(4, 2, 8, rng, "tdl");
        Linear lin(8, 3, rng, "lin");
        std::vector<int> ids = {1, 4, 2};

        auto build = [&](Graph& g) {
            auto x = emb.forward(g, ids);
            auto enc = bigru_encode(g, x, cell, bwd);
            auto att = attn.attend(g, enc.context, enc.outputs);
            auto scores = lin.forward(g, att.context);
            auto lab_mat = g.stack_rows({g.slice(att.context, 0, 4), g.slice(att.context, 4, 8)});
            auto feats = g.stack_rows({g.slice(enc.context, 0, 4), g.slice(enc.context, 4, 8)});
            auto dec = tdl.forward(g, lab_mat, feats, 0.0, drop, false);
            auto pooled = g.concat(g.mean_over_rows(dec), g.softmax(scores));
            return g.mean_all(g.tanh(pooled));
        };

        NamedParams named;
        emb.collect(named);
        cell.collect(named);
        bwd.collect(named);
        attn.collect(named);
        tdl.collect(named);
        lin.collect(named);
        std::vector<TensorPtr> params;
        for (auto& [n, t] : named) params.push_back(t);

        auto res = test::finite_difference_check(
            params,
            [&] {
                Graph g;
                return build(g)->data[0];
            },
            [&] {
                Graph g;
                g.backward(build(g));
            });
        CHECK_MESSAGE(res.max_rel_err < 1e-4, "worst ", res.worst_param, " analytic ",
                      res.worst_analytic, " numeric ", res.worst_numeric);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "mrhar/metrics.hpp"
#include "mrhar/rng.hpp"
#include "support.hpp"

using namespace mrhar;

namespace {

// Brute-force sentence BLEU, written independently of src/metrics.cpp: count
// n-grams by scanning all positions pairwise, no hash maps.
double oracle_bleu(const std::vector<int>& c, const std::vector<int>& r, bool smoothing = true) {
    if (c.empty()) return 0.0;
    int c_len = static_cast<int>(c.size()), r_len = static_cast<int>(r.size());
    int n_max = std::min(4, c_len);
    double log_sum = 0;
    for (int n = 1; n <= n_max; ++n) {
        int total = c_len - n + 1;
        double matched = 0;
        std::vector<bool> ref_used(std::max(0, r_len - n + 1), false);
        for (int i = 0; i < total; ++i) {
            // clipped matching: every candidate n-gram may claim each
            // reference position at most once
            for (int j = 0; j + n <= r_len; ++j) {
                if (ref_used[j]) continue;
                bool eq = true;
                for (int k = 0; k < n; ++k)
                    if (c[i + k] != r[j + k]) {
                        eq = false;
                        break;
                    }
                if (eq) {
                    ref_used[j] = true;
                    matched += 1;
                    break;
                }
            }
        }
        double p = matched > 0 ? matched / total : (smoothing ? 0.5 / total : 0.0);
        if (p == 0.0) return 0.0;
        log_sum += std::log(p);
    }
    double bp = c_len < r_len ? std::exp(1.0 - static_cast<double>(r_len) / c_len) : 1.0;
    return bp * std::exp(log_sum / n_max);
}

} // namespace

TEST_CASE("identical sequences score a perfect 1") {
    std::vector<int> s = {1, 2, 3, 4, 5};
    CHECK(bleu(s, s).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empty candidate scores 0, empty reference is an error") {
    CHECK(bleu({}, {1, 2}).value == 0.0);
    CHECK_THROWS_AS(bleu({1, 2}, {}), DataError);
}

TEST_CASE("the four-vs-five token hand case") {
    // precisions 4/4 3/3 2/2 1/1, BP = exp(1 - 5/4)
    auto s = bleu({0, 1, 2, 3}, {0, 1, 2, 3, 4});
    CHECK(s.per_n[0] == doctest::Approx(1.0));
    CHECK(s.per_n[3] == doctest::Approx(1.0));
    CHECK(s.brevity_penalty == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
    CHECK(s.value == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
    CHECK(s.value == doctest::Approx(0.7788).epsilon(1e-4));
}

TEST_CASE("clipping caps repeated n-grams at the reference count") {
    // candidate repeats one token; reference has it twice
    auto s = bleu({7, 7, 7, 7}, {7, 7, 1, 2});
    CHECK(s.per_n[0] == doctest::Approx(0.5)); // 2 clipped matches out of 4
}

TEST_CASE("short candidates use only the attainable n-gram orders") {
    auto s = bleu({3, 4}, {3, 4, 5, 6, 7});
    CHECK(s.n_used == 2);
    CHECK(s.per_n[0] == doctest::Approx(1.0));
    CHECK(s.per_n[1] == doctest::Approx(1.0));
    CHECK(s.value == doctest::Approx(std::exp(1.0 - 5.0 / 2.0)).epsilon(1e-12));
}

TEST_CASE("bleu is invariant under relabeling of the token alphabet") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> c, r;
        int lc = 1 + static_cast<int>(rng.index(12));
        int lr = 1 + static_cast<int>(rng.index(12));
        for (int i = 0; i < lc; ++i) c.push_back(static_cast<int>(rng.index(8)));
        for (int i = 0; i < lr; ++i) r.push_back(static_cast<int>(rng.index(8)));

        std::vector<int> perm = {5, 2, 7, 0, 4, 6, 1, 3}; // a fixed bijection
        auto mc = c, mr = r;
        for (auto& t : mc) t = perm[t] + 100;
        for (auto& t : mr) t = perm[t] + 100;
        CHECK(bleu(c, r).value == doctest::Approx(bleu(mc, mr).value).epsilon(1e-12));
    }
}

TEST_CASE("bleu matches the brute-force oracle on random pairs") {
    Rng rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<int> c, r;
        int lc = static_cast<int>(rng.index(26));      // 0..25
        int lr = 1 + static_cast<int>(rng.index(25));  // 1..25
        for (int i = 0; i < lc; ++i) c.push_back(static_cast<int>(rng.index(10)));
        for (int i = 0; i < lr; ++i) r.push_back(static_cast<int>(rng.index(10)));
        double mine = bleu(c, r).value;
        double oracle = oracle_bleu(c, r);
        CHECK_MESSAGE(std::fabs(mine - oracle) < 1e-12, "lc=", lc, " lr=", lr, " mine=", mine,
                      " oracle=", oracle);
    }
}

TEST_CASE("bleu report averages within classes and overall") {
    std::vector<std::vector<int>> preds = {{1, 2, 3}, {4, 5}};
    std::vector<std::vector<int>> refs = {{1, 2, 3}, {4, 5}};
    std::vector<std::set<int>> labels = {{0}, {0, 2}};
    auto rep = bleu_report(preds, refs, labels, 3);
    CHECK(rep.overall == doctest::Approx(1.0));
    CHECK(rep.class_mean[0] == doctest::Approx(1.0));
    CHECK(rep.class_count[0] == 2);
    CHECK(rep.class_count[1] == 0);
    CHECK(rep.class_count[2] == 1);

    // single class present: overall equals that class mean
    std::vector<std::set<int>> one_class = {{1}, {1}};
    std::vector<std::vector<int>> p2 = {{1, 2}, {9, 9}};
    auto rep2 = bleu_report(p2, refs, one_class, 3);
    CHECK(rep2.class_mean[1] == doctest::Approx(rep2.overall));

    CHECK_THROWS_AS(bleu_report({{1}}, refs, labels, 3), DataError);
}

TEST_CASE("classification report on the four-instance toy example") {
    // preds {A},{A,B},{B},{} vs truths {A},{B},{B},{A} with A=0, B=1
    std::vector<std::set<int>> preds = {{0}, {0, 1}, {1}, {}};
    std::vector<std::set<int>> truths = {{0}, {1}, {1}, {0}};
    auto s = classification_report(preds, truths, 2);
    CHECK(s.precision[0] == doctest::Approx(0.5));
    CHECK(s.recall[0] == doctest::Approx(0.5));
    CHECK(s.f1[0] == doctest::Approx(0.5));
    CHECK(s.precision[1] == doctest::Approx(1.0));
    CHECK(s.recall[1] == doctest::Approx(1.0));
    CHECK(s.f1[1] == doctest::Approx(1.0));
    CHECK(s.accuracy == doctest::Approx(0.5));
    CHECK(s.macro_f1 == doctest::Approx(0.75));
}

TEST_CASE("perfect predictions score 1 everywhere") {
    std::vector<std::set<int>> sets = {{0}, {1, 2}, {2}};
    auto s = classification_report(sets, sets, 3);
    CHECK(s.accuracy == doctest::Approx(1.0));
    CHECK(s.macro_f1 == doctest::Approx(1.0));
    for (int l = 0; l < 3; ++l) CHECK(s.f1[l] == doctest::Approx(1.0));
}

TEST_CASE("never-predicted never-true classes follow the zero convention") {
    std::vector<std::set<int>> preds = {{0}};
    std::vector<std::set<int>> truths = {{0}};
    auto s = classification_report(preds, truths, 2);
    CHECK(s.precision[1] == 0.0);
    CHECK(s.recall[1] == 0.0);
    CHECK(s.f1[1] == 0.0);
}

TEST_CASE("macro f1 is invariant under consistent class permutation") {
    Rng rng(11);
    int L = 5;
    std::vector<std::set<int>> preds, truths;
    for (int i = 0; i < 60; ++i) {
        std::set<int> p, t;
        p.insert(static_cast<int>(rng.index(L)));
        if (rng.bernoulli(0.5)) p.insert(static_cast<int>(rng.index(L)));
        t.insert(static_cast<int>(rng.index(L)));
        if (rng.bernoulli(0.5)) t.insert(static_cast<int>(rng.index(L)));
        preds.push_back(p);
        truths.push_back(t);
    }
    std::vector<int> perm = {3, 0, 4, 1, 2};
    auto apply = [&](const std::vector<std::set<int>>& sets) {
        std::vector<std::set<int>> out;
        for (const auto& s : sets) {
            std::set<int> m;
            for (int l : s) m.insert(perm[l]);
            out.push_back(m);
        }
        return out;
    };
    auto a = classification_report(preds, truths, L);
    auto b = classification_report(apply(preds), apply(truths), L);
    CHECK(a.macro_f1 == doctest::Approx(b.macro_f1).epsilon(1e-12));
    CHECK(a.accuracy == doctest::Approx(b.accuracy).epsilon(1e-12));
}

TEST_CASE("out-of-range labels are rejected") {
    CHECK_THROWS_AS(classification_report({{5}}, {{0}}, 3), DataError);
    CHECK_THROWS_AS(classification_report({{0}}, {{5}}, 3), DataError);
}

TEST_CASE("mean and sample stddev behave at the edges") {
    CHECK(mean_of({2.0, 4.0}) == doctest::Approx(3.0));
    CHECK(stddev_of({2.0, 4.0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(stddev_of({2.0}) == 0.0);
}

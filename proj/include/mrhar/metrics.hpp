#pragma once
#include <array>
#include <set>
#include <string>
#include <vector>

namespace mrhar {

struct BleuScore {
    std::array<double, 4> per_n{};  // modified n-gram precisions, slots past n_used stay 0
    int n_used = 0;                 // min(4, candidate length)
    double brevity_penalty = 1.0;
    double value = 0.0;
};

struct BleuOptions {
    // Zero-count precision slots become 1/(2 * candidate n-gram count); with
    // smoothing off any zero precision collapses the score to 0.
    bool smoothing = true;
};

// Sentence BLEU: clipped n-gram precisions for n=1..4 (capped at the
// candidate length), geometric mean, brevity penalty exp(1-|r|/|c|) when the
// candidate is shorter than the reference.
BleuScore bleu(const std::vector<int>& candidate, const std::vector<int>& reference,
               const BleuOptions& opt = {});

struct BleuReport {
    std::vector<double> class_mean;  // length L
    std::vector<int> class_count;    // instances contributing to each class
    double overall = 0.0;            // mean over instances (each counted once)
    int total = 0;
};

// Sentence-level BLEU per instance, averaged per activity class and overall.
// An instance contributes to every class in its true label set.
BleuReport bleu_report(const std::vector<std::vector<int>>& predictions,
                       const std::vector<std::vector<int>>& references,
                       const std::vector<std::set<int>>& true_labels, int n_labels,
                       const BleuOptions& opt = {});

struct ClassificationScores {
    std::vector<double> precision, recall, f1; // per class
    std::vector<int> tp, fp, fn, support;
    double macro_f1 = 0.0;
    double accuracy = 0.0; // exact-set match rate
    int total = 0;
};

// Multi-label scores from predicted/true label sets. Zero-denominator
// precision/recall are 0 by convention; F1 is 0 when both are.
ClassificationScores classification_report(const std::vector<std::set<int>>& pred_sets,
                                           const std::vector<std::set<int>>& true_sets,
                                           int n_labels);

double mean_of(const std::vector<double>& xs);
// Sample standard deviation (n-1); NaN-free: returns 0 for fewer than 2 items.
double stddev_of(const std::vector<double>& xs);

} // namespace mrhar

#include "mrhar/metrics.hpp"

#include <cmath>
#include <map>

#include "mrhar/errors.hpp"

namespace mrhar {

BleuScore bleu(const std::vector<int>& candidate, const std::vector<int>& reference,
               const BleuOptions& opt) {
    if (reference.empty()) throw DataError("bleu: empty reference");
    BleuScore score;
    if (candidate.empty()) return score; // zero precision, maximal penalty

    int c_len = static_cast<int>(candidate.size());
    int r_len = static_cast<int>(reference.size());
    score.n_used = std::min(4, c_len);

    double log_sum = 0.0;
    bool zero = false;
    for (int n = 1; n <= score.n_used; ++n) {
        std::map<std::vector<int>, int> cand_counts, ref_counts;
        for (int i = 0; i + n <= c_len; ++i)
            cand_counts[{candidate.begin() + i, candidate.begin() + i + n}]++;
        for (int i = 0; i + n <= r_len; ++i)
            ref_counts[{reference.begin() + i, reference.begin() + i + n}]++;

        int total = c_len - n + 1;
        double clipped = 0;
        for (const auto& [gram, count] : cand_counts) {
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) clipped += std::min(count, it->second);
        }
        double p;
        if (clipped > 0) {
            p = clipped / total;
        } else if (opt.smoothing) {
            p = 0.5 / total;
        } else {
            p = 0.0;
            zero = true;
        }
        score.per_n[n - 1] = p;
        if (p > 0) log_sum += std::log(p);
    }

    score.brevity_penalty = c_len < r_len ? std::exp(1.0 - static_cast<double>(r_len) / c_len) : 1.0;
    score.value = zero ? 0.0 : score.brevity_penalty * std::exp(log_sum / score.n_used);
    return score;
}

BleuReport bleu_report(const std::vector<std::vector<int>>& predictions,
                       const std::vector<std::vector<int>>& references,
                       const std::vector<std::set<int>>& true_labels, int n_labels,
                       const BleuOptions& opt) {
    if (predictions.size() != references.size() || predictions.size() != true_labels.size())
        throw DataError("bleu_report: prediction/reference/label list lengths differ");
    BleuReport rep;
    rep.class_mean.assign(n_labels, 0.0);
    rep.class_count.assign(n_labels, 0);
    double sum = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        double v = bleu(predictions[i], references[i], opt).value;
        sum += v;
        for (int l : true_labels[i]) {
            if (l < 0 || l >= n_labels)
                throw DataError("bleu_report: label " + std::to_string(l) + " outside " +
                                std::to_string(n_labels) + " classes");
            rep.class_mean[l] += v;
            rep.class_count[l]++;
        }
    }
    rep.total = static_cast<int>(predictions.size());
    rep.overall = rep.total ? sum / rep.total : 0.0;
    for (int l = 0; l < n_labels; ++l)
        if (rep.class_count[l]) rep.class_mean[l] /= rep.class_count[l];
    return rep;
}

ClassificationScores classification_report(const std::vector<std::set<int>>& pred_sets,
                                           const std::vector<std::set<int>>& true_sets,
                                           int n_labels) {
    if (pred_sets.size() != true_sets.size())
        throw DataError("classification_report: prediction/truth list lengths differ");
    ClassificationScores s;
    s.tp.assign(n_labels, 0);
    s.fp.assign(n_labels, 0);
    s.fn.assign(n_labels, 0);
    s.support.assign(n_labels, 0);
    s.total = static_cast<int>(pred_sets.size());

    int exact = 0;
    for (size_t i = 0; i < pred_sets.size(); ++i) {
        for (int l : pred_sets[i])
            if (l < 0 || l >= n_labels)
                throw DataError("classification_report: predicted label " + std::to_string(l) +
                                " outside " + std::to_string(n_labels) + " classes");
        for (int l : true_sets[i])
            if (l < 0 || l >= n_labels)
                throw DataError("classification_report: true label " + std::to_string(l) +
                                " outside " + std::to_string(n_labels) + " classes");
        if (pred_sets[i] == true_sets[i]) ++exact;
        for (int l = 0; l < n_labels; ++l) {
            bool p = pred_sets[i].count(l) > 0;
            bool t = true_sets[i].count(l) > 0;
            if (t) s.support[l]++;
            if (p && t) s.tp[l]++;
            else if (p && !t) s.fp[l]++;
            else if (!p && t) s.fn[l]++;
        }
    }

    s.precision.assign(n_labels, 0.0);
    s.recall.assign(n_labels, 0.0);
    s.f1.assign(n_labels, 0.0);
    double f1_sum = 0;
    for (int l = 0; l < n_labels; ++l) {
        int denom_p = s.tp[l] + s.fp[l];
        int denom_r = s.tp[l] + s.fn[l];
        s.precision[l] = denom_p ? static_cast<double>(s.tp[l]) / denom_p : 0.0;
        s.recall[l] = denom_r ? static_cast<double>(s.tp[l]) / denom_r : 0.0;
        s.f1[l] = (s.precision[l] + s.recall[l]) > 0
                      ? 2 * s.precision[l] * s.recall[l] / (s.precision[l] + s.recall[l])
                      : 0.0;
        f1_sum += s.f1[l];
    }
    s.macro_f1 = n_labels ? f1_sum / n_labels : 0.0;
    s.accuracy = s.total ? static_cast<double>(exact) / s.total : 0.0;
    return s;
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0;
    for (double x : xs) s += x;
    return s / xs.size();
}

double stddev_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean_of(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / (xs.size() - 1));
}

} // namespace mrhar

#pragma once
#include <ostream>
#include <string>
#include <vector>

#include "mrhar/harness.hpp"

namespace mrhar {

std::vector<std::string> default_label_names(int n_labels);

// One record per metric: scenario model class metric value std ("-" = absent).
struct MetricRecord {
    std::string scenario, model, cls, metric;
    double value = 0.0;
    double std_dev = 0.0;
    bool has_std = false;
};

std::vector<MetricRecord> aggregate_fold_results(const std::vector<FoldResult>& folds,
                                                 int n_labels);
void write_metric_records(std::ostream& out, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_metric_records(const std::string& path);

// Plain-text tables: per-class separation BLEU, accuracy/macro-F1 per
// scenario and model, and per-class precision/recall/F1 for BiGRU+Q2L.
void render_tables(std::ostream& out, const std::vector<MetricRecord>& records,
                   const std::vector<std::string>& label_names);

// Per-instance prediction dump: id, per-label probabilities (6 decimals),
// predicted label names.
void write_predictions(std::ostream& out, const std::vector<LabelPrediction>& preds,
                       const std::vector<std::string>& label_names);

// Decoded token sequences, one instance per line, segments separated by the
// literal tokens EOS SOS.
void write_generations(std::ostream& out, const std::vector<std::vector<int>>& sequences,
                       const Vocabulary& vocab);

} // namespace mrhar

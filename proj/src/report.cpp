#include "mrhar/report.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace mrhar {

std::vector<std::string> default_label_names(int n_labels) {
    std::vector<std::string> names;
    names.reserve(n_labels);
    for (int i = 0; i < n_labels; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "activity_%02d", i + 1);
        names.emplace_back(buf);
    }
    return names;
}

namespace {

MetricRecord make_record(std::string scenario, std::string model, std::string cls,
                         std::string metric, const std::vector<double>& fold_values) {
    MetricRecord r;
    r.scenario = std::move(scenario);
    r.model = std::move(model);
    r.cls = std::move(cls);
    r.metric = std::move(metric);
    r.value = mean_of(fold_values);
    r.has_std = fold_values.size() >= 2;
    r.std_dev = r.has_std ? stddev_of(fold_values) : 0.0;
    return r;
}

} // namespace

std::vector<MetricRecord> aggregate_fold_results(const std::vector<FoldResult>& folds,
                                                 int n_labels) {
    auto names = default_label_names(n_labels);
    std::vector<MetricRecord> records;

    // separation BLEU
    {
        std::vector<double> overall;
        for (const auto& f : folds) overall.push_back(f.sep_bleu.overall);
        records.push_back(make_record("separation", "seq2res", "overall", "bleu", overall));
        for (int l = 0; l < n_labels; ++l) {
            std::vector<double> vals;
            int count = 0;
            for (const auto& f : folds)
                if (l < static_cast<int>(f.sep_bleu.class_count.size()) &&
                    f.sep_bleu.class_count[l] > 0) {
                    vals.push_back(f.sep_bleu.class_mean[l]);
                    count += f.sep_bleu.class_count[l];
                }
            if (vals.empty()) continue;
            records.push_back(make_record("separation", "seq2res", names[l], "bleu", vals));
            records.push_back(
                make_record("separation", "seq2res", names[l], "support", {double(count)}));
        }
    }

    // classification
    const char* model_names[2] = {"bigru_bn", "bigru_q2l"};
    for (int s = 0; s < 3; ++s) {
        std::string scen = scenario_name(static_cast<Scenario>(s));
        for (int m = 0; m < 2; ++m) {
            std::vector<double> acc, mf1;
            for (const auto& f : folds) {
                acc.push_back(f.cls[s][m].accuracy);
                mf1.push_back(f.cls[s][m].macro_f1);
            }
            records.push_back(make_record(scen, model_names[m], "all", "accuracy", acc));
            records.push_back(make_record(scen, model_names[m], "all", "macro_f1", mf1));
            for (int l = 0; l < n_labels; ++l) {
                std::vector<double> p, r, f1;
                int support = 0;
                for (const auto& f : folds) {
                    if (f.cls[s][m].support.empty() || f.cls[s][m].support[l] == 0) continue;
                    p.push_back(f.cls[s][m].precision[l]);
                    r.push_back(f.cls[s][m].recall[l]);
                    f1.push_back(f.cls[s][m].f1[l]);
                    support += f.cls[s][m].support[l];
                }
                if (p.empty()) continue;
                records.push_back(make_record(scen, model_names[m], names[l], "precision", p));
                records.push_back(make_record(scen, model_names[m], names[l], "recall", r));
                records.push_back(make_record(scen, model_names[m], names[l], "f1", f1));
                records.push_back(
                    make_record(scen, model_names[m], names[l], "support", {double(support)}));
            }
        }
    }
    return records;
}

void write_metric_records(std::ostream& out, const std::vector<MetricRecord>& records) {
    out << std::setprecision(6) << std::fixed;
    for (const auto& r : records) {
        out << r.scenario << " " << r.model << " " << r.cls << " " << r.metric << " " << r.value
            << " ";
        if (r.has_std) out << r.std_dev;
        else out << "-";
        out << "\n";
    }
}

std::vector<MetricRecord> read_metric_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("report: cannot open '" + path + "'");
    std::vector<MetricRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        MetricRecord r;
        std::string std_field;
        if (!(ls >> r.scenario >> r.model >> r.cls >> r.metric >> r.value >> std_field))
            throw DataError("report: malformed record '" + line + "'");
        if (std_field != "-") {
            r.has_std = true;
            r.std_dev = std::stod(std_field);
        }
        records.push_back(std::move(r));
    }
    return records;
}

namespace {

const MetricRecord* find_record(const std::vector<MetricRecord>& records,
                                const std::string& scenario, const std::string& model,
                                const std::string& cls, const std::string& metric) {
    for (const auto& r : records)
        if (r.scenario == scenario && r.model == model && r.cls == cls && r.metric == metric)
            return &r;
    return nullptr;
}

std::string pct(const MetricRecord* r) {
    if (!r) return "-";
    char buf[64];
    if (r->has_std)
        std::snprintf(buf, sizeof buf, "%.2f (%.2f)", 100 * r->value, 100 * r->std_dev);
    else
        std::snprintf(buf, sizeof buf, "%.2f", 100 * r->value);
    return buf;
}

std::string raw(const MetricRecord* r, int prec) {
    if (!r) return "-";
    char buf[64];
    if (r->has_std)
        std::snprintf(buf, sizeof buf, "%.*f (%.*f)", prec, r->value, prec, r->std_dev);
    else
        std::snprintf(buf, sizeof buf, "%.*f", prec, r->value);
    return buf;
}

} // namespace

void render_tables(std::ostream& out, const std::vector<MetricRecord>& records,
                   const std::vector<std::string>& label_names) {
    out << "== Resident separation (sentence BLEU, cross-validation mean) ==\n";
    out << std::left << std::setw(20) << "class" << std::setw(22) << "bleu" << "\n";
    for (const auto& name : label_names) {
        auto* r = find_record(records, "separation", "seq2res", name, "bleu");
        if (!r) continue;
        out << std::left << std::setw(20) << name << std::setw(22) << raw(r, 4) << "\n";
    }
    out << std::left << std::setw(20) << "overall" << std::setw(22)
        << raw(find_record(records, "separation", "seq2res", "overall", "bleu"), 4) << "\n\n";

    out << "== Activity recognition (accuracy % / macro-F1 %, exact-set-match accuracy) ==\n";
    out << std::left << std::setw(10) << "scenario" << std::setw(12) << "model" << std::setw(18)
        << "accuracy" << std::setw(18) << "macro_f1" << "\n";
    for (const char* scen : {"no_sep", "s2s_sep", "gt_sep"})
        for (const char* model : {"bigru_bn", "bigru_q2l"}) {
            auto* acc = find_record(records, scen, model, "all", "accuracy");
            auto* mf1 = find_record(records, scen, model, "all", "macro_f1");
            if (!acc && !mf1) continue;
            out << std::left << std::setw(10) << scen << std::setw(12) << model << std::setw(18)
                << pct(acc) << std::setw(18) << pct(mf1) << "\n";
        }
    out << "\n";

    out << "== BiGRU+Q2L per class (precision % / recall % / F1 %) ==\n";
    out << std::left << std::setw(14) << "class";
    for (const char* h : {"P:no_sep", "P:s2s", "P:gt", "R:no_sep", "R:s2s", "R:gt", "F1:no_sep",
                          "F1:s2s", "F1:gt", "support"})
        out << std::setw(12) << h;
    out << "\n";
    for (const auto& name : label_names) {
        bool any = false;
        std::ostringstream row;
        row << std::left << std::setw(14) << name;
        for (const char* metric : {"precision", "recall", "f1"})
            for (const char* scen : {"no_sep", "s2s_sep", "gt_sep"}) {
                auto* r = find_record(records, scen, "bigru_q2l", name, metric);
                any = any || r != nullptr;
                row << std::setw(12) << (r ? pct(r) : "-");
            }
        auto* sup = find_record(records, "no_sep", "bigru_q2l", name, "support");
        row << std::setw(12) << (sup ? std::to_string(static_cast<long>(sup->value)) : "-");
        if (any) out << row.str() << "\n";
    }
}

void write_predictions(std::ostream& out, const std::vector<LabelPrediction>& preds,
                       const std::vector<std::string>& label_names) {
    out << std::setprecision(6) << std::fixed;
    for (size_t i = 0; i < preds.size(); ++i) {
        out << i;
        for (double p : preds[i].probs) out << " " << p;
        for (int l : preds[i].predicted) out << " " << label_names.at(l);
        out << "\n";
    }
}

void write_generations(std::ostream& out, const std::vector<std::vector<int>>& sequences,
                       const Vocabulary& vocab) {
    static const char* special[4] = {"PAD", "SOS", "EOS", "UNK"};
    for (const auto& seq : sequences) {
        for (size_t i = 0; i < seq.size(); ++i) {
            if (i) out << " ";
            if (seq[i] >= 0 && seq[i] < 4) out << special[seq[i]];
            else out << vocab.token(seq[i]);
        }
        out << "\n";
    }
}

} // namespace mrhar

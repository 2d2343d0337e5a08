#include "mrhar/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "mrhar/casas.hpp"
#include "mrhar/checkpoint.hpp"
#include "mrhar/optim.hpp"
#include "mrhar/report.hpp"

namespace fs = std::filesystem;

namespace mrhar {

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

FoldPlan make_fold_plan(std::vector<int> day_ids) {
    if (day_ids.size() != 26)
        throw DataError("fold plan: reference layout needs exactly 26 days, got " +
                        std::to_string(day_ids.size()));
    std::sort(day_ids.begin(), day_ids.end());
    FoldPlan plan;
    for (int f = 0; f < 6; ++f)
        plan.test_days.push_back({day_ids[3 * f], day_ids[3 * f + 1], day_ids[3 * f + 2]});
    for (int f = 0; f < 4; ++f)
        plan.test_days.push_back({day_ids[18 + 2 * f], day_ids[18 + 2 * f + 1]});
    return plan;
}

FoldPlan make_even_fold_plan(std::vector<int> day_ids, int n_folds) {
    if (n_folds < 1 || n_folds > static_cast<int>(day_ids.size()))
        throw ConfigError("fold plan: need 1 <= folds <= days, got " + std::to_string(n_folds) +
                          " folds for " + std::to_string(day_ids.size()) + " days");
    std::sort(day_ids.begin(), day_ids.end());
    FoldPlan plan;
    int n = static_cast<int>(day_ids.size());
    int base = n / n_folds, extra = n % n_folds;
    int pos = 0;
    for (int f = 0; f < n_folds; ++f) {
        int take = base + (f < extra ? 1 : 0);
        plan.test_days.emplace_back(day_ids.begin() + pos, day_ids.begin() + pos + take);
        pos += take;
    }
    return plan;
}

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::NoSep: return "no_sep";
        case Scenario::S2SSep: return "s2s_sep";
        case Scenario::GTSep: return "gt_sep";
    }
    return "?";
}

Scenario scenario_from_name(const std::string& name) {
    if (name == "no_sep") return Scenario::NoSep;
    if (name == "s2s_sep") return Scenario::S2SSep;
    if (name == "gt_sep") return Scenario::GTSep;
    throw ConfigError("unknown scenario '" + name + "' (no_sep | s2s_sep | gt_sep)");
}

std::vector<DayData> load_day_dir(const std::string& dir, const RunConfig& cfg) {
    if (!fs::is_directory(dir)) throw IoError("data: '" + dir + "' is not a directory");
    CorrectionTable corrections;
    if (!cfg.corrections_path.empty()) corrections = load_corrections(cfg.corrections_path);

    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("data: no day files in '" + dir + "'");

    std::vector<DayData> days;
    int id = 1;
    for (const auto& path : files) {
        auto parsed = parse_casas_file(path, corrections);
        DayData day;
        day.day_id = id++;
        day.path = path;
        day.diagnostics = std::move(parsed.diagnostics);
        day.events = filter_motion_off(parsed.events, cfg.motion_prefix, cfg.off_value);
        complete_second_labels(day.events);
        days.push_back(std::move(day));
    }
    return days;
}

std::vector<SensorEvent> pool_events(const std::vector<DayData>& days,
                                     const std::vector<int>& day_ids) {
    std::vector<SensorEvent> out;
    for (const auto& day : days)
        if (std::find(day_ids.begin(), day_ids.end(), day.day_id) != day_ids.end())
            out.insert(out.end(), day.events.begin(), day.events.end());
    return out;
}

std::vector<Instance> build_instances(const std::vector<DayData>& days,
                                      const std::vector<int>& day_ids, const Vocabulary& vocab,
                                      const RunConfig& cfg) {
    WindowingOptions opt;
    opt.width = cfg.window_width;
    opt.step = cfg.window_step;
    opt.n_labels = cfg.n_labels;
    std::vector<Instance> out;
    for (const auto& day : days) {
        if (std::find(day_ids.begin(), day_ids.end(), day.day_id) == day_ids.end()) continue;
        auto inst = window_instances(day.events, day.day_id, vocab, opt);
        out.insert(out.end(), inst.begin(), inst.end());
    }
    return out;
}

std::vector<int> gt_sep_tokens(const Instance& inst) {
    std::vector<int> t = inst.target_sep;
    t.pop_back(); // drop the trailing EOS: {e1} EOS SOS {e2}
    return t;
}

namespace {

void shuffle_indices(std::vector<size_t>& order, Rng& rng) {
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.index(i)]);
}

void maybe_checkpoint(const std::string& dir, const NamedParams& params, int epoch, int every,
                      bool final_epoch) {
    if (dir.empty()) return;
    if (final_epoch)
        save_checkpoint(dir + "/checkpoint.txt", params);
    else if (every > 0 && (epoch + 1) % every == 0)
        save_checkpoint(dir + "/checkpoint_epoch" + std::to_string(epoch + 1) + ".txt", params);
}

} // namespace

TrainLog train_seq2res(const RunConfig& cfg, const std::vector<Instance>& train,
                       Seq2ResModel& model, uint64_t seed, std::ostream* log,
                       const std::string& checkpoint_dir) {
    if (train.empty()) throw DataError("train_seq2res: empty training set");
    std::vector<SeparationTarget> targets;
    targets.reserve(train.size());
    for (const auto& inst : train) targets.push_back(SeparationTarget::validate(inst.target_sep));

    auto params = model.parameter_tensors();
    auto named = model.parameters();
    AdamState st(params, cfg.s2r_lr);
    Rng shuffle_rng(mix_seed(seed, 11));
    Rng dropout_rng(mix_seed(seed, 12));

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainLog result;
    for (int epoch = 0; epoch < cfg.s2r_epochs; ++epoch) {
        st.lr = lr_schedule(cfg.s2r_lr, epoch, cfg.s2r_half_period);
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0;
        for (size_t start = 0; start < order.size(); start += cfg.s2r_batch) {
            size_t end = std::min(order.size(), start + cfg.s2r_batch);
            Graph g;
            TensorPtr sum;
            for (size_t i = start; i < end; ++i) {
                auto res = model.forward_teacher(g, train[order[i]].window, targets[order[i]],
                                                 dropout_rng, true);
                epoch_loss += res.loss->data[0];
                sum = sum ? g.add(sum, res.loss) : res.loss;
            }
            auto loss = g.scale(sum, 1.0 / static_cast<double>(end - start));
            if (!std::isfinite(loss->data[0]))
                throw DivergenceError("train_seq2res: loss diverged (non-finite) at epoch " +
                                      std::to_string(epoch));
            g.backward(loss);
            adam_step(params, st);
        }
        result.epoch_loss.push_back(epoch_loss / train.size());
        if (log && (epoch % 10 == 0 || epoch + 1 == cfg.s2r_epochs))
            *log << "seq2res epoch " << epoch << " loss " << result.epoch_loss.back() << "\n";
        maybe_checkpoint(checkpoint_dir, named, epoch, cfg.checkpoint_every,
                         epoch + 1 == cfg.s2r_epochs);
    }

    // teacher-forced token accuracy of the final model, eval mode
    Rng no_dropout(0);
    long correct = 0, total = 0;
    for (size_t i = 0; i < train.size(); ++i) {
        Graph g;
        auto res = model.forward_teacher(g, train[i].window, targets[i], no_dropout, false);
        correct += res.correct;
        total += res.total;
    }
    result.final_token_accuracy = total ? static_cast<double>(correct) / total : 0.0;
    return result;
}

TrainLog train_classifier(const RunConfig& cfg, const std::vector<Instance>& train,
                          Scenario scenario, ClassifierModel& model, const Seq2ResModel* sep,
                          uint64_t seed, std::ostream* log, const std::string& checkpoint_dir) {
    if (train.empty()) throw DataError("train_classifier: empty training set");
    if (scenario == Scenario::S2SSep && sep == nullptr)
        throw ConfigError("train_classifier: the s2s_sep scenario needs a separation model");

    // Scenario-specific input encodings, fixed for the whole run. The frozen
    // separation model generates once per instance, not once per epoch.
    std::vector<std::vector<int>> hard_inputs;
    std::vector<TensorPtr> soft_inputs;
    if (scenario == Scenario::NoSep) {
        for (const auto& inst : train) hard_inputs.push_back(inst.window);
    } else if (scenario == Scenario::GTSep) {
        for (const auto& inst : train) hard_inputs.push_back(gt_sep_tokens(inst));
    } else {
        for (const auto& inst : train)
            soft_inputs.push_back(sep->generate(inst.window, cfg.effective_max_len()).prob_vectors);
    }

    auto params = model.parameter_tensors();
    auto named = model.parameters();
    AdamState st(params, cfg.cls_lr);
    Rng shuffle_rng(mix_seed(seed, 21));
    Rng dropout_rng(mix_seed(seed, 22));

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainLog result;
    for (int epoch = 0; epoch < cfg.cls_epochs; ++epoch) {
        if (cfg.cls_half_period > 0) st.lr = lr_schedule(cfg.cls_lr, epoch, cfg.cls_half_period);
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0;
        for (size_t start = 0; start < order.size(); start += cfg.cls_batch) {
            size_t end = std::min(order.size(), start + cfg.cls_batch);
            Graph g;
            TensorPtr sum;
            for (size_t i = start; i < end; ++i) {
                size_t idx = order[i];
                ClassifierInput in;
                if (scenario == Scenario::S2SSep) in.soft_rows = soft_inputs[idx];
                else in.ids = &hard_inputs[idx];
                auto probs = model.forward_probs(g, in, dropout_rng, true);
                auto loss = bce_loss(g, probs, train[idx].labels);
                epoch_loss += loss->data[0];
                sum = sum ? g.add(sum, loss) : loss;
            }
            auto loss = g.scale(sum, 1.0 / static_cast<double>(end - start));
            if (!std::isfinite(loss->data[0]))
                throw DivergenceError("train_classifier: loss diverged (non-finite) at epoch " +
                                      std::to_string(epoch));
            g.backward(loss);
            adam_step(params, st);
        }
        result.epoch_loss.push_back(epoch_loss / train.size());
        if (log && (epoch % 10 == 0 || epoch + 1 == cfg.cls_epochs))
            *log << scenario_name(scenario) << " classifier epoch " << epoch << " loss "
                 << result.epoch_loss.back() << "\n";
        maybe_checkpoint(checkpoint_dir, named, epoch, cfg.checkpoint_every,
                         epoch + 1 == cfg.cls_epochs);
    }
    return result;
}

SeparationEval eval_separation(const Seq2ResModel& model, const std::vector<Instance>& test,
                               const RunConfig& cfg) {
    SeparationEval out;
    std::vector<std::vector<int>> refs;
    std::vector<std::set<int>> labels;
    for (const auto& inst : test) {
        auto gen = model.generate(inst.window, cfg.effective_max_len());
        out.generated.push_back(gen.tokens);
        out.truncated.push_back(gen.truncated);
        refs.push_back(inst.target_sep);
        std::set<int> ls;
        for (int l = 0; l < static_cast<int>(inst.labels.size()); ++l)
            if (inst.labels[l]) ls.insert(l);
        labels.push_back(std::move(ls));
    }
    out.report = bleu_report(out.generated, refs, labels, cfg.n_labels);
    return out;
}

ClassifierEval eval_classifier(const ClassifierModel& model, const std::vector<Instance>& test,
                               Scenario scenario, const Seq2ResModel* sep, const RunConfig& cfg) {
    if (scenario == Scenario::S2SSep && sep == nullptr)
        throw ConfigError("eval_classifier: the s2s_sep scenario needs a separation model");
    ClassifierEval out;
    std::vector<std::set<int>> pred_sets, true_sets;
    for (const auto& inst : test) {
        LabelPrediction pred;
        if (scenario == Scenario::S2SSep) {
            pred = run_two_stage(*sep, model, inst.window, cfg.effective_max_len());
        } else {
            std::vector<int> ids =
                scenario == Scenario::NoSep ? inst.window : gt_sep_tokens(inst);
            ClassifierInput in;
            in.ids = &ids;
            pred = model.predict(in);
        }
        pred_sets.emplace_back(pred.predicted.begin(), pred.predicted.end());
        std::set<int> ts;
        for (int l = 0; l < static_cast<int>(inst.labels.size()); ++l)
            if (inst.labels[l]) ts.insert(l);
        true_sets.push_back(std::move(ts));
        out.predictions.push_back(std::move(pred));
    }
    out.scores = classification_report(pred_sets, true_sets, cfg.n_labels);
    return out;
}

namespace {

FoldPlan plan_for(const RunConfig& cfg, int n_days) {
    std::vector<int> ids(n_days);
    for (int i = 0; i < n_days; ++i) ids[i] = i + 1;
    if (cfg.folds > 0) return make_even_fold_plan(ids, cfg.folds);
    if (n_days == 26) return make_fold_plan(ids);
    throw ConfigError("run-all: dataset has " + std::to_string(n_days) +
                      " days; set harness.folds explicitly (the 26-day reference plan does not apply)");
}

void run_fold(const RunConfig& cfg, const std::vector<DayData>& days, const FoldPlan& plan,
              int fold, const std::string& out_dir, FoldResult& result, std::ostream* log) {
    const auto& test_days = plan.test_days[fold];
    std::vector<int> train_days;
    for (const auto& day : days)
        if (std::find(test_days.begin(), test_days.end(), day.day_id) == test_days.end())
            train_days.push_back(day.day_id);

    // Everything learned derives from the train split only.
    auto vocab = Vocabulary::build(pool_events(days, train_days));
    auto train_inst = build_instances(days, train_days, vocab, cfg);
    auto test_inst = build_instances(days, test_days, vocab, cfg);
    if (train_inst.empty() || test_inst.empty())
        throw DataError("run-all: fold " + std::to_string(fold + 1) +
                        " has an empty train or test split");

    std::string fold_tag = "fold" + std::to_string(fold + 1);
    uint64_t fold_seed = mix_seed(cfg.seed, 1000 + fold);

    // separation model
    std::string sep_dir = out_dir + "/separation/seq2res/" + fold_tag;
    fs::create_directories(sep_dir);
    vocab.save(sep_dir + "/vocab.tsv");
    Rng sep_rng(mix_seed(fold_seed, 1));
    Seq2ResModel sep(vocab.size(), cfg.s2r, sep_rng);
    train_seq2res(cfg, train_inst, sep, fold_seed, log, sep_dir);
    auto sep_eval = eval_separation(sep, test_inst, cfg);
    result.sep_bleu = sep_eval.report;
    {
        std::ofstream gen_out(sep_dir + "/generations.txt");
        write_generations(gen_out, sep_eval.generated, vocab);
    }

    auto label_names = default_label_names(cfg.n_labels);
    for (int m = 0; m < 2; ++m) {
        HeadKind kind = m == 0 ? HeadKind::BinaryRelevance : HeadKind::Query2Label;
        std::string model_name = m == 0 ? "bigru_bn" : "bigru_q2l";
        for (int s = 0; s < 3; ++s) {
            auto scenario = static_cast<Scenario>(s);
            std::string dir = out_dir + "/" + scenario_name(scenario) + "/" + model_name + "/" +
                              fold_tag;
            fs::create_directories(dir);
            // fresh seeded initialization per scenario and head
            Rng cls_rng(mix_seed(fold_seed, 10 + 2 * s + m));
            ClassifierModel cls(kind, vocab.size(), cfg.n_labels, cfg.cls, cls_rng);
            train_classifier(cfg, train_inst, scenario, cls,
                             scenario == Scenario::S2SSep ? &sep : nullptr, fold_seed, log, dir);
            auto eval = eval_classifier(cls, test_inst, scenario,
                                        scenario == Scenario::S2SSep ? &sep : nullptr, cfg);
            result.cls[s][m] = eval.scores;
            std::ofstream pred_out(dir + "/predictions.txt");
            write_predictions(pred_out, eval.predictions, label_names);
        }
    }
    result.fold = fold + 1;
}

} // namespace

void run_all(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
             std::ostream& log) {
    auto days = load_day_dir(data_dir, cfg);
    auto plan = plan_for(cfg, static_cast<int>(days.size()));

    fs::create_directories(out_dir);
    {
        std::ofstream cfg_out(out_dir + "/config.txt");
        dump_config(cfg_out, cfg);
        std::ofstream plan_out(out_dir + "/fold_plan.txt");
        for (size_t f = 0; f < plan.test_days.size(); ++f) {
            plan_out << "fold " << f + 1 << " test_days";
            for (int d : plan.test_days[f]) plan_out << " " << d;
            plan_out << "\n";
        }
    }

    int n_folds = static_cast<int>(plan.test_days.size());
    std::vector<FoldResult> results(n_folds);
    int jobs = std::max(1, std::min(cfg.jobs, n_folds));
    log << "run-all: " << n_folds << " folds, " << jobs << " worker(s)\n";

    if (jobs == 1) {
        for (int f = 0; f < n_folds; ++f) {
            log << "fold " << f + 1 << "/" << n_folds << "\n";
            run_fold(cfg, days, plan, f, out_dir, results[f], &log);
        }
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(n_folds);
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back([&, w]() {
                for (int f = w; f < n_folds; f += jobs) {
                    try {
                        run_fold(cfg, days, plan, f, out_dir, results[f], nullptr);
                    } catch (...) {
                        errors[f] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    auto records = aggregate_fold_results(results, cfg.n_labels);
    {
        std::ofstream rec_out(out_dir + "/metrics.txt");
        write_metric_records(rec_out, records);
        std::ofstream tab_out(out_dir + "/tables.txt");
        render_tables(tab_out, records, default_label_names(cfg.n_labels));
    }
    log << "run-all: wrote " << out_dir << "/metrics.txt and tables.txt\n";
}

} // namespace mrhar

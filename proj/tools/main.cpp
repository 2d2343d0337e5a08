#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "mrhar/casas.hpp"
#include "mrhar/checkpoint.hpp"
#include "mrhar/config.hpp"
#include "mrhar/harness.hpp"
#include "mrhar/report.hpp"
#include "mrhar/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mrhar;

namespace {

// Exit codes: 0 ok, 64 usage, 65 config, 66 missing/unreadable file,
// 67 data format, 70 internal, 75 training divergence.
constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;
constexpr int kExitIo = 66;
constexpr int kExitData = 67;
constexpr int kExitInternal = 70;
constexpr int kExitDivergence = 75;

std::vector<int> parse_day_list(const std::string& text) {
    std::vector<int> days;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        auto dash = item.find('-');
        if (dash == std::string::npos) {
            days.push_back(std::stoi(item));
        } else {
            int a = std::stoi(item.substr(0, dash));
            int b = std::stoi(item.substr(dash + 1));
            for (int d = a; d <= b; ++d) days.push_back(d);
        }
    }
    if (days.empty()) throw ConfigError("empty day list '" + text + "'");
    return days;
}

RunConfig config_from(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return load_config(path);
}

std::vector<int> all_day_ids(const std::vector<DayData>& days) {
    std::vector<int> ids;
    for (const auto& d : days) ids.push_back(d.day_id);
    return ids;
}

Seq2ResModel load_seq2res(const std::string& dir, const RunConfig& cfg, int vocab_size) {
    Rng rng(0);
    Seq2ResModel model(vocab_size, cfg.s2r, rng);
    restore_params(model.parameters(), load_checkpoint(dir + "/checkpoint.txt"));
    return model;
}

ClassifierModel load_classifier(const std::string& dir, HeadKind kind, const RunConfig& cfg,
                                int vocab_size) {
    Rng rng(0);
    ClassifierModel model(kind, vocab_size, cfg.n_labels, cfg.cls, rng);
    restore_params(model.parameters(), load_checkpoint(dir + "/checkpoint.txt"));
    return model;
}

int cmd_prep(const std::string& config_path, const std::string& in_dir,
             const std::string& out_dir, const std::string& corrections) {
    RunConfig cfg = config_from(config_path);
    if (!corrections.empty()) cfg.corrections_path = corrections;
    auto days = load_day_dir(in_dir, cfg);
    fs::create_directories(out_dir);

    auto vocab = Vocabulary::build(pool_events(days, all_day_ids(days)));
    vocab.save(out_dir + "/vocab.tsv");
    auto instances = build_instances(days, all_day_ids(days), vocab, cfg);
    save_instances(out_dir + "/instances.txt", instances);

    std::ofstream diag(out_dir + "/diagnostics.txt");
    int short_days = 0;
    for (const auto& day : days) {
        if (static_cast<int>(day.events.size()) < cfg.window_width) {
            diag << day.path << ": only " << day.events.size() << " events, no windows\n";
            ++short_days;
        }
        for (const auto& d : day.diagnostics) diag << day.path << ": " << d << "\n";
    }
    std::cout << "prep: " << days.size() << " days, " << instances.size() << " instances, vocab "
              << vocab.size() << " tokens";
    if (short_days) std::cout << ", " << short_days << " day(s) below window width";
    std::cout << "\n      instances -> " << out_dir << "/instances.txt\n";
    return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, double overlap,
              int days, int events, uint64_t seed) {
    RunConfig cfg = config_from(config_path);
    if (overlap >= 0) cfg.synth.overlap = overlap;
    if (days > 0) cfg.synth.days = days;
    if (events > 0) cfg.synth.events_per_day = events;
    if (seed > 0) cfg.synth.seed = seed;
    auto paths = write_synthetic_days(cfg.synth, out_dir);
    std::cout << "synth: wrote " << paths.size() << " day files under " << out_dir << "\n";
    return 0;
}

int cmd_train_sep(const std::string& config_path, const std::string& data_dir,
                  const std::string& day_list, const std::string& out_dir, uint64_t seed) {
    RunConfig cfg = config_from(config_path);
    if (seed > 0) cfg.seed = seed;
    auto days = load_day_dir(data_dir, cfg);
    auto train_days = day_list.empty() ? all_day_ids(days) : parse_day_list(day_list);

    auto vocab = Vocabulary::build(pool_events(days, train_days));
    auto train = build_instances(days, train_days, vocab, cfg);
    fs::create_directories(out_dir);
    vocab.save(out_dir + "/vocab.tsv");

    Rng rng(mix_seed(cfg.seed, 1));
    Seq2ResModel model(vocab.size(), cfg.s2r, rng);
    auto log = train_seq2res(cfg, train, model, cfg.seed, &std::cout, out_dir);
    std::cout << "train-sep: " << train.size() << " instances, final loss "
              << log.epoch_loss.back() << ", teacher-forced token accuracy "
              << log.final_token_accuracy << "\n      checkpoint -> " << out_dir
              << "/checkpoint.txt\n";
    return 0;
}

int cmd_train_cls(const std::string& config_path, const std::string& data_dir,
                  const std::string& day_list, const std::string& scenario_str,
                  const std::string& model_str, const std::string& sep_dir,
                  const std::string& out_dir, uint64_t seed) {
    RunConfig cfg = config_from(config_path);
    if (seed > 0) cfg.seed = seed;
    Scenario scenario = scenario_from_name(scenario_str);
    HeadKind kind;
    if (model_str == "bigru_bn") kind = HeadKind::BinaryRelevance;
    else if (model_str == "bigru_q2l") kind = HeadKind::Query2Label;
    else throw ConfigError("unknown model '" + model_str + "' (bigru_bn | bigru_q2l)");

    auto days = load_day_dir(data_dir, cfg);
    auto train_days = day_list.empty() ? all_day_ids(days) : parse_day_list(day_list);
    auto vocab = Vocabulary::build(pool_events(days, train_days));
    auto train = build_instances(days, train_days, vocab, cfg);
    fs::create_directories(out_dir);
    vocab.save(out_dir + "/vocab.tsv");

    Seq2ResModel sep;
    bool have_sep = false;
    if (scenario == Scenario::S2SSep) {
        if (sep_dir.empty())
            throw ConfigError("train-cls: --sep <dir> is required for the s2s_sep scenario");
        sep = load_seq2res(sep_dir, cfg, vocab.size());
        have_sep = true;
    }

    Rng rng(mix_seed(cfg.seed, 2));
    ClassifierModel model(kind, vocab.size(), cfg.n_labels, cfg.cls, rng);
    auto log = train_classifier(cfg, train, scenario, model, have_sep ? &sep : nullptr, cfg.seed,
                                &std::cout, out_dir);
    std::cout << "train-cls: " << train.size() << " instances, final loss "
              << log.epoch_loss.back() << "\n      checkpoint -> " << out_dir
              << "/checkpoint.txt\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& data_dir,
             const std::string& day_list, const std::string& model_str,
             const std::string& scenario_str, const std::string& model_dir,
             const std::string& sep_dir, const std::string& out_dir) {
    RunConfig cfg = config_from(config_path);
    auto days = load_day_dir(data_dir, cfg);
    auto test_days = day_list.empty() ? all_day_ids(days) : parse_day_list(day_list);
    auto vocab = Vocabulary::load(model_dir + "/vocab.tsv");
    auto test = build_instances(days, test_days, vocab, cfg);
    fs::create_directories(out_dir);
    auto labels = default_label_names(cfg.n_labels);

    if (model_str == "seq2res") {
        auto model = load_seq2res(model_dir, cfg, vocab.size());
        auto eval = eval_separation(model, test, cfg);
        std::ofstream gen(out_dir + "/generations.txt");
        write_generations(gen, eval.generated, vocab);
        std::ofstream met(out_dir + "/metrics.txt");
        met << std::setprecision(6) << std::fixed;
        met << "separation seq2res overall bleu " << eval.report.overall << " -\n";
        for (int l = 0; l < cfg.n_labels; ++l)
            if (eval.report.class_count[l])
                met << "separation seq2res " << labels[l] << " bleu " << eval.report.class_mean[l]
                    << " -\n";
        std::cout << "eval: " << test.size() << " instances, overall BLEU " << eval.report.overall
                  << "\n";
        return 0;
    }

    HeadKind kind = model_str == "bigru_bn" ? HeadKind::BinaryRelevance : HeadKind::Query2Label;
    if (model_str != "bigru_bn" && model_str != "bigru_q2l")
        throw ConfigError("unknown model '" + model_str + "' (seq2res | bigru_bn | bigru_q2l)");
    Scenario scenario = scenario_from_name(scenario_str);
    auto model = load_classifier(model_dir, kind, cfg, vocab.size());
    Seq2ResModel sep;
    bool have_sep = false;
    if (scenario == Scenario::S2SSep) {
        if (sep_dir.empty()) throw ConfigError("eval: --sep <dir> is required for s2s_sep");
        sep = load_seq2res(sep_dir, cfg, vocab.size());
        have_sep = true;
    }
    auto eval = eval_classifier(model, test, scenario, have_sep ? &sep : nullptr, cfg);
    std::ofstream pred(out_dir + "/predictions.txt");
    write_predictions(pred, eval.predictions, labels);
    std::ofstream met(out_dir + "/metrics.txt");
    met << std::setprecision(6) << std::fixed;
    met << scenario_str << " " << model_str << " all accuracy " << eval.scores.accuracy << " -\n";
    met << scenario_str << " " << model_str << " all macro_f1 " << eval.scores.macro_f1 << " -\n";
    for (int l = 0; l < cfg.n_labels; ++l) {
        if (!eval.scores.support[l]) continue;
        met << scenario_str << " " << model_str << " " << labels[l] << " precision "
            << eval.scores.precision[l] << " -\n";
        met << scenario_str << " " << model_str << " " << labels[l] << " recall "
            << eval.scores.recall[l] << " -\n";
        met << scenario_str << " " << model_str << " " << labels[l] << " f1 " << eval.scores.f1[l]
            << " -\n";
    }
    std::cout << "eval: " << test.size() << " instances, accuracy " << eval.scores.accuracy
              << ", macro-F1 " << eval.scores.macro_f1 << "\n";
    return 0;
}

int cmd_run_all(const std::string& config_path, const std::string& data_dir,
                const std::string& out_dir, uint64_t seed, int jobs) {
    RunConfig cfg = config_from(config_path);
    if (seed > 0) cfg.seed = seed;
    if (jobs > 0) cfg.jobs = jobs;
    cfg.validate();
    run_all(cfg, data_dir, out_dir, std::cout);
    return 0;
}

int cmd_report(const std::string& in_dir, int n_labels) {
    auto records = read_metric_records(in_dir + "/metrics.txt");
    render_tables(std::cout, records, default_label_names(n_labels));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-resident activity recognition: resident separation + multi-label classification"};
    app.require_subcommand(1);

    std::string config_path, in_dir, out_dir, data_dir, day_list, corrections;
    std::string scenario_str = "no_sep", model_str, model_dir, sep_dir;
    double overlap = -1;
    int days = 0, events = 0, jobs = 0, n_labels = 15;
    uint64_t seed = 0;

    auto* prep = app.add_subcommand("prep", "ingest day files into instance + vocabulary files");
    prep->add_option("--in", in_dir, "directory of day files")->required();
    prep->add_option("--out", out_dir, "output directory")->required();
    prep->add_option("--config", config_path, "run configuration file");
    prep->add_option("--corrections", corrections, "activity label correction table");

    auto* synth = app.add_subcommand("synth", "generate synthetic two-resident day files");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--config", config_path, "run configuration file");
    synth->add_option("--overlap", overlap, "zone overlap in [0,1]");
    synth->add_option("--days", days, "number of day files");
    synth->add_option("--events", events, "events per day");
    synth->add_option("--seed", seed, "generator seed");

    auto* tsep = app.add_subcommand("train-sep", "train the resident separation model");
    tsep->add_option("--config", config_path, "run configuration file");
    tsep->add_option("--data", data_dir, "directory of day files")->required();
    tsep->add_option("--train-days", day_list, "day list, e.g. 1,2,5-7 (default: all)");
    tsep->add_option("--out", out_dir, "output directory")->required();
    tsep->add_option("--seed", seed, "seed override");

    auto* tcls = app.add_subcommand("train-cls", "train a multi-label activity classifier");
    tcls->add_option("--config", config_path, "run configuration file");
    tcls->add_option("--data", data_dir, "directory of day files")->required();
    tcls->add_option("--train-days", day_list, "day list (default: all)");
    tcls->add_option("--scenario", scenario_str, "no_sep | s2s_sep | gt_sep")->required();
    tcls->add_option("--model", model_str, "bigru_bn | bigru_q2l")->required();
    tcls->add_option("--sep", sep_dir, "trained separation model dir (s2s_sep)");
    tcls->add_option("--out", out_dir, "output directory")->required();
    tcls->add_option("--seed", seed, "seed override");

    auto* ev = app.add_subcommand("eval", "evaluate a trained model on held-out days");
    ev->add_option("--config", config_path, "run configuration file");
    ev->add_option("--data", data_dir, "directory of day files")->required();
    ev->add_option("--test-days", day_list, "day list (default: all)");
    ev->add_option("--model", model_str, "seq2res | bigru_bn | bigru_q2l")->required();
    ev->add_option("--scenario", scenario_str, "classifier scenario");
    ev->add_option("--model-dir", model_dir, "dir with checkpoint.txt + vocab.tsv")->required();
    ev->add_option("--sep", sep_dir, "trained separation model dir (s2s_sep)");
    ev->add_option("--out", out_dir, "output directory")->required();

    auto* runall = app.add_subcommand("run-all", "cross-validated scenario grid");
    runall->add_option("--config", config_path, "run configuration file");
    runall->add_option("--data", data_dir, "directory of day files")->required();
    runall->add_option("--out", out_dir, "report directory")->required();
    runall->add_option("--seed", seed, "seed override");
    runall->add_option("--jobs", jobs, "parallel fold workers");

    auto* rep = app.add_subcommand("report", "render tables from a run-all report directory");
    rep->add_option("--in", in_dir, "report directory containing metrics.txt")->required();
    rep->add_option("--labels", n_labels, "number of activity classes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (prep->parsed()) return cmd_prep(config_path, in_dir, out_dir, corrections);
        if (synth->parsed()) return cmd_synth(config_path, out_dir, overlap, days, events, seed);
        if (tsep->parsed()) return cmd_train_sep(config_path, data_dir, day_list, out_dir, seed);
        if (tcls->parsed())
            return cmd_train_cls(config_path, data_dir, day_list, scenario_str, model_str, sep_dir,
                                 out_dir, seed);
        if (ev->parsed())
            return cmd_eval(config_path, data_dir, day_list, model_str, scenario_str, model_dir,
                            sep_dir, out_dir);
        if (runall->parsed()) return cmd_run_all(config_path, data_dir, out_dir, seed, jobs);
        if (rep->parsed()) return cmd_report(in_dir, n_labels);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}

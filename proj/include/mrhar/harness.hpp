#pragma once
#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "mrhar/classifiers.hpp"
#include "mrhar/config.hpp"
#include "mrhar/metrics.hpp"
#include "mrhar/pipeline.hpp"
#include "mrhar/seq2res.hpp"

namespace mrhar {

struct FoldPlan {
    std::vector<std::vector<int>> test_days;
};

// Reference 26-day layout: folds 1-6 test on consecutive day triples over
// days 1..18, folds 7-10 on consecutive pairs over days 19..26.
FoldPlan make_fold_plan(std::vector<int> day_ids);
// Consecutive near-even chunks, for datasets of any size.
FoldPlan make_even_fold_plan(std::vector<int> day_ids, int n_folds);

enum class Scenario { NoSep = 0, S2SSep = 1, GTSep = 2 };
const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct DayData {
    int day_id = 0;
    std::string path;
    std::vector<SensorEvent> events; // filtered + label-completed
    std::vector<std::string> diagnostics;
};

// Parses every regular file in the directory in filename order; day ids are
// 1-based positions. Applies corrections, the motion-OFF filter and second-
// label completion.
std::vector<DayData> load_day_dir(const std::string& dir, const RunConfig& cfg);

std::vector<SensorEvent> pool_events(const std::vector<DayData>& days,
                                     const std::vector<int>& day_ids);
std::vector<Instance> build_instances(const std::vector<DayData>& days,
                                      const std::vector<int>& day_ids, const Vocabulary& vocab,
                                      const RunConfig& cfg);

// Ground-truth separated serialization fed to classifiers in the GT_Sep
// scenario: the separation target without its trailing EOS.
std::vector<int> gt_sep_tokens(const Instance& inst);

struct TrainLog {
    std::vector<double> epoch_loss;        // mean per-instance loss per epoch
    double final_token_accuracy = 0.0;     // teacher-forced, eval mode (seq2res)
};

TrainLog train_seq2res(const RunConfig& cfg, const std::vector<Instance>& train,
                       Seq2ResModel& model, uint64_t seed, std::ostream* log = nullptr,
                       const std::string& checkpoint_dir = "");

// sep is required exactly for the S2S_Sep scenario; its generations are
// cached once up front (the model is frozen).
TrainLog train_classifier(const RunConfig& cfg, const std::vector<Instance>& train,
                          Scenario scenario, ClassifierModel& model, const Seq2ResModel* sep,
                          uint64_t seed, std::ostream* log = nullptr,
                          const std::string& checkpoint_dir = "");

struct SeparationEval {
    BleuReport report;
    std::vector<std::vector<int>> generated;
    std::vector<bool> truncated;
};
SeparationEval eval_separation(const Seq2ResModel& model, const std::vector<Instance>& test,
                               const RunConfig& cfg);

struct ClassifierEval {
    ClassificationScores scores;
    std::vector<LabelPrediction> predictions;
};
ClassifierEval eval_classifier(const ClassifierModel& model, const std::vector<Instance>& test,
                               Scenario scenario, const Seq2ResModel* sep, const RunConfig& cfg);

// One fold's numbers; [scenario][0]=BiGRU+BN, [scenario][1]=BiGRU+Q2L.
struct FoldResult {
    int fold = 0;
    BleuReport sep_bleu;
    std::array<std::array<ClassificationScores, 2>, 3> cls;
};

// Full grid: per fold, train the separation model and both classifier heads
// under all three scenarios, evaluate on the held-out days, and write the
// report tree (config snapshot, per-fold dumps, aggregate records, rendered
// tables). Timing goes to `log` only so the output tree stays byte-stable for
// a fixed seed.
void run_all(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
             std::ostream& log);

uint64_t mix_seed(uint64_t seed, uint64_t stream);

} // namespace mrhar

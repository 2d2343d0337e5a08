#pragma once
#include <cstdint>
#include <ostream>
#include <string>

#include "mrhar/classifiers.hpp"
#include "mrhar/seq2res.hpp"
#include "mrhar/synthetic.hpp"

namespace mrhar {

// Every knob of a run, with defaults matching the reference training recipe.
// Loaded from a flat commented key-value file with [section] headers; every
// value is echoed into emitted reports for provenance.
struct RunConfig {
    uint64_t seed = 1;

    // [data]
    int window_width = 16;
    int window_step = 3;
    int n_labels = 15;
    std::string motion_prefix = "M";
    std::string off_value = "OFF";
    std::string corrections_path;

    // [seq2res]
    Seq2ResConfig s2r;
    double s2r_lr = 0.001;
    int s2r_half_period = 80;
    int s2r_epochs = 300;
    int s2r_batch = 100;
    int max_len = 0; // 0 -> window_width + 3

    // [classifier]
    ClassifierConfig cls;
    double cls_lr = 1e-4;
    int cls_half_period = 0; // 0 -> constant lr
    int cls_epochs = 100;
    int cls_batch = 100;

    // [harness]
    int jobs = 1;
    int folds = 0; // 0 -> 26-day reference plan when there are 26 days
    int checkpoint_every = 20;

    // [synth]
    SyntheticConfig synth;

    int effective_max_len() const { return max_len > 0 ? max_len : window_width + 3; }
    void validate() const;
};

RunConfig load_config(const std::string& path);
void apply_config_line(RunConfig& cfg, const std::string& section, const std::string& key,
                       const std::string& value);
void dump_config(std::ostream& out, const RunConfig& cfg);

} // namespace mrhar

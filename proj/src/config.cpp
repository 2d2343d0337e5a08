#include "mrhar/config.hpp"

#include <fstream>
#include <sstream>

#include "mrhar/errors.hpp"

namespace mrhar {

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos;
        int x = std::stoi(v, &pos);
        if (pos == v.size()) return x;
    } catch (...) {
    }
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos;
        double x = std::stod(v, &pos);
        if (pos == v.size()) return x;
    } catch (...) {
    }
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos;
        uint64_t x = std::stoull(v, &pos);
        if (pos == v.size()) return x;
    } catch (...) {
    }
    throw ConfigError("config: " + key + " expects an unsigned integer, got '" + v + "'");
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

void apply_config_line(RunConfig& cfg, const std::string& section, const std::string& key,
                       const std::string& value) {
    std::string k = section.empty() ? key : section + "." + key;

    if (k == "seed") cfg.seed = to_u64(k, value);
    else if (k == "data.window_width") cfg.window_width = to_int(k, value);
    else if (k == "data.window_step") cfg.window_step = to_int(k, value);
    else if (k == "data.n_labels") cfg.n_labels = to_int(k, value);
    else if (k == "data.motion_prefix") cfg.motion_prefix = value;
    else if (k == "data.off_value") cfg.off_value = value;
    else if (k == "data.corrections") cfg.corrections_path = value;
    else if (k == "seq2res.embed") cfg.s2r.enc_embed = to_int(k, value);
    else if (k == "seq2res.hidden") cfg.s2r.enc_hidden = to_int(k, value);
    else if (k == "seq2res.dec_embed") cfg.s2r.dec_embed = to_int(k, value);
    else if (k == "seq2res.attn_dim") cfg.s2r.attn_dim = to_int(k, value);
    else if (k == "seq2res.dropout_enc") cfg.s2r.dropout_enc = to_double(k, value);
    else if (k == "seq2res.dropout_dec") cfg.s2r.dropout_dec = to_double(k, value);
    else if (k == "seq2res.lr") cfg.s2r_lr = to_double(k, value);
    else if (k == "seq2res.lr_half_period") cfg.s2r_half_period = to_int(k, value);
    else if (k == "seq2res.epochs") cfg.s2r_epochs = to_int(k, value);
    else if (k == "seq2res.batch") cfg.s2r_batch = to_int(k, value);
    else if (k == "seq2res.max_len") cfg.max_len = to_int(k, value);
    else if (k == "classifier.embed") cfg.cls.embed = to_int(k, value);
    else if (k == "classifier.hidden") cfg.cls.hidden = to_int(k, value);
    else if (k == "classifier.q2l_layers") cfg.cls.q2l_layers = to_int(k, value);
    else if (k == "classifier.q2l_heads") cfg.cls.q2l_heads = to_int(k, value);
    else if (k == "classifier.q2l_ffn") cfg.cls.q2l_ffn = to_int(k, value);
    else if (k == "classifier.dropout") cfg.cls.dropout = to_double(k, value);
    else if (k == "classifier.threshold") cfg.cls.threshold = to_double(k, value);
    else if (k == "classifier.lr") cfg.cls_lr = to_double(k, value);
    else if (k == "classifier.lr_half_period") cfg.cls_half_period = to_int(k, value);
    else if (k == "classifier.epochs") cfg.cls_epochs = to_int(k, value);
    else if (k == "classifier.batch") cfg.cls_batch = to_int(k, value);
    else if (k == "harness.jobs") cfg.jobs = to_int(k, value);
    else if (k == "harness.folds") cfg.folds = to_int(k, value);
    else if (k == "harness.checkpoint_every") cfg.checkpoint_every = to_int(k, value);
    else if (k == "synth.days") cfg.synth.days = to_int(k, value);
    else if (k == "synth.events_per_day") cfg.synth.events_per_day = to_int(k, value);
    else if (k == "synth.classes") cfg.synth.n_classes = to_int(k, value);
    else if (k == "synth.sensors_per_activity") cfg.synth.sensors_per_activity = to_int(k, value);
    else if (k == "synth.overlap") cfg.synth.overlap = to_double(k, value);
    else if (k == "synth.event_rate") cfg.synth.event_rate = to_double(k, value);
    else if (k == "synth.dwell_events") cfg.synth.dwell_events = to_int(k, value);
    else if (k == "synth.seed") cfg.synth.seed = to_u64(k, value);
    else throw ConfigError("config: unknown key '" + k + "'");
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
        apply_config_line(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (window_width < 4) throw ConfigError("config: window width must be at least 4");
    if (window_step < 1) throw ConfigError("config: window step must be positive");
    if (n_labels < 1) throw ConfigError("config: n_labels must be positive");
    if (s2r_lr <= 0 || cls_lr <= 0) throw ConfigError("config: learning rates must be positive");
    if (s2r_epochs < 1 || cls_epochs < 1) throw ConfigError("config: epochs must be positive");
    if (s2r_batch < 1 || cls_batch < 1) throw ConfigError("config: batch sizes must be positive");
    if (cls.threshold <= 0 || cls.threshold >= 1)
        throw ConfigError("config: threshold must lie in (0,1)");
    if (jobs < 1) throw ConfigError("config: jobs must be positive");
    if (max_len != 0 && max_len < 3) throw ConfigError("config: max_len must be 0 or >= 3");
}

void dump_config(std::ostream& out, const RunConfig& cfg) {
    out << "seed = " << cfg.seed << "\n";
    out << "[data]\n";
    out << "window_width = " << cfg.window_width << "\n";
    out << "window_step = " << cfg.window_step << "\n";
    out << "n_labels = " << cfg.n_labels << "\n";
    out << "motion_prefix = " << cfg.motion_prefix << "\n";
    out << "off_value = " << cfg.off_value << "\n";
    out << "corrections = " << cfg.corrections_path << "\n";
    out << "[seq2res]\n";
    out << "embed = " << cfg.s2r.enc_embed << "\n";
    out << "hidden = " << cfg.s2r.enc_hidden << "\n";
    out << "dec_embed = " << cfg.s2r.dec_embed << "\n";
    out << "attn_dim = " << cfg.s2r.attn_dim << "\n";
    out << "dropout_enc = " << cfg.s2r.dropout_enc << "\n";
    out << "dropout_dec = " << cfg.s2r.dropout_dec << "\n";
    out << "lr = " << cfg.s2r_lr << "\n";
    out << "lr_half_period = " << cfg.s2r_half_period << "\n";
    out << "epochs = " << cfg.s2r_epochs << "\n";
    out << "batch = " << cfg.s2r_batch << "\n";
    out << "max_len = " << cfg.effective_max_len() << "\n";
    out << "[classifier]\n";
    out << "embed = " << cfg.cls.embed << "\n";
    out << "hidden = " << cfg.cls.hidden << "\n";
    out << "q2l_layers = " << cfg.cls.q2l_layers << "\n";
    out << "q2l_heads = " << cfg.cls.q2l_heads << "\n";
    out << "q2l_ffn = " << cfg.cls.q2l_ffn << "\n";
    out << "dropout = " << cfg.cls.dropout << "\n";
    out << "threshold = " << cfg.cls.threshold << "\n";
    out << "lr = " << cfg.cls_lr << "\n";
    out << "lr_half_period = " << cfg.cls_half_period << "\n";
    out << "epochs = " << cfg.cls_epochs << "\n";
    out << "batch = " << cfg.cls_batch << "\n";
    out << "[harness]\n";
    out << "jobs = " << cfg.jobs << "\n";
    out << "folds = " << cfg.folds << "\n";
    out << "checkpoint_every = " << cfg.checkpoint_every << "\n";
    out << "[synth]\n";
    out << "days = " << cfg.synth.days << "\n";
    out << "events_per_day = " << cfg.synth.events_per_day << "\n";
    out << "classes = " << cfg.synth.n_classes << "\n";
    out << "sensors_per_activity = " << cfg.synth.sensors_per_activity << "\n";
    out << "overlap = " << cfg.synth.overlap << "\n";
    out << "event_rate = " << cfg.synth.event_rate << "\n";
    out << "dwell_events = " << cfg.synth.dwell_events << "\n";
    out << "seed = " << cfg.synth.seed << "\n";
}

} // namespace mrhar

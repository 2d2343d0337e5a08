#include "mrhar/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "mrhar/errors.hpp"

namespace mrhar {

void complete_second_labels(std::vector<SensorEvent>& events) {
    int last[2] = {-1, -1};
    for (auto& e : events) {
        if (e.resident == 1 || e.resident == 2) last[e.resident - 1] = e.activity;
        if (e.other_resident == 1 || e.other_resident == 2)
            last[e.other_resident - 1] = e.other_activity;
        e.act_of[0] = last[0];
        e.act_of[1] = last[1];
    }
}

std::vector<SensorEvent> filter_motion_off(const std::vector<SensorEvent>& events,
                                           const std::string& motion_prefix,
                                           const std::string& off_value) {
    std::vector<SensorEvent> kept;
    kept.reserve(events.size());
    for (const auto& e : events) {
        bool motion_off = e.sensor.rfind(motion_prefix, 0) == 0 && e.value == off_value;
        if (!motion_off) kept.push_back(e);
    }
    return kept;
}

std::vector<uint8_t> majority_vote(const std::array<const SensorEvent*, 3>& last3, int n_labels) {
    std::vector<uint8_t> bits(n_labels, 0);
    for (int r = 0; r < 2; ++r) {
        int votes[3] = {last3[0]->act_of[r], last3[1]->act_of[r], last3[2]->act_of[r]};
        int winner;
        if (votes[0] == votes[1] || votes[0] == votes[2])
            winner = votes[0];
        else if (votes[1] == votes[2])
            winner = votes[1];
        else
            winner = votes[2]; // all distinct: most recent
        if (winner < 0) continue;
        if (winner >= n_labels)
            throw DataError("majority_vote: activity " + std::to_string(winner) +
                            " outside the configured " + std::to_string(n_labels) + " classes");
        bits[winner] = 1;
    }
    return bits;
}

std::vector<Instance> window_instances(const std::vector<SensorEvent>& day_events, int day_id,
                                       const Vocabulary& vocab, const WindowingOptions& opt) {
    std::vector<Instance> out;
    int n = static_cast<int>(day_events.size());
    if (n < opt.width) return out; // reported by the caller

    for (int start = 0; start + opt.width <= n; start += opt.step) {
        std::vector<SensorEvent> window(day_events.begin() + start,
                                        day_events.begin() + start + opt.width);
        Instance inst;
        inst.day_id = day_id;
        inst.window_start = start;
        inst.window.reserve(opt.width);
        for (const auto& e : window) inst.window.push_back(vocab.id_or_unk(e.token()));
        inst.target_sep = make_separation_target(window, vocab).tokens;
        std::array<const SensorEvent*, 3> last3 = {&window[opt.width - 3], &window[opt.width - 2],
                                                   &window[opt.width - 1]};
        inst.labels = majority_vote(last3, opt.n_labels);
        out.push_back(std::move(inst));
    }
    return out;
}

void save_instances(const std::string& path, const std::vector<Instance>& instances) {
    std::ofstream out(path);
    if (!out) throw IoError("instances: cannot open '" + path + "' for writing");
    for (const auto& inst : instances) {
        out << inst.day_id << " " << inst.window_start;
        for (int t : inst.window) out << " " << t;
        out << " |";
        for (int t : inst.target_sep) out << " " << t;
        out << " | ";
        for (uint8_t b : inst.labels) out << (b ? '1' : '0');
        out << "\n";
    }
}

std::vector<Instance> load_instances(const std::string& path, int n_labels) {
    std::ifstream in(path);
    if (!in) throw IoError("instances: cannot open '" + path + "'");
    std::vector<Instance> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Instance inst;
        std::string tok;
        if (!(ls >> inst.day_id >> inst.window_start))
            throw DataError("instances: bad header on line " + std::to_string(lineno));
        while (ls >> tok && tok != "|") inst.window.push_back(std::stoi(tok));
        while (ls >> tok && tok != "|") inst.target_sep.push_back(std::stoi(tok));
        std::string mask;
        if (!(ls >> mask) || static_cast<int>(mask.size()) != n_labels)
            throw DataError("instances: bad label mask on line " + std::to_string(lineno));
        for (char c : mask) inst.labels.push_back(c == '1' ? 1 : 0);
        out.push_back(std::move(inst));
    }
    return out;
}

} // namespace mrhar

#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mrhar/events.hpp"
#include "mrhar/seq2res.hpp"
#include "mrhar/vocab.hpp"

namespace mrhar {

// One training/evaluation example: a fixed-width token window, its separation
// target and its multi-label activity target.
struct Instance {
    std::vector<int> window;       // width token ids
    std::vector<int> target_sep;   // {e1} EOS SOS {e2} EOS
    std::vector<uint8_t> labels;   // length L, 1 or 2 bits set
    int day_id = 0;
    int window_start = 0;
};

// Carry each resident's most recent activity forward so every event holds the
// pair (activity of resident 1, activity of resident 2); -1 until a resident
// first acts. Order, timestamps and sensor fields are untouched.
void complete_second_labels(std::vector<SensorEvent>& events);

// Drop events where a motion-class sensor reports its OFF value.
std::vector<SensorEvent> filter_motion_off(const std::vector<SensorEvent>& events,
                                           const std::string& motion_prefix = "M",
                                           const std::string& off_value = "OFF");

// Per resident, the label with >= 2 votes among the last 3 events; a 3-way
// tie goes to the most recent. Winning -1 ("none yet") sets no bit.
std::vector<uint8_t> majority_vote(const std::array<const SensorEvent*, 3>& last3, int n_labels);

struct WindowingOptions {
    int width = 16;
    int step = 3;
    int n_labels = 15;
};

// Full-width windows only, starting at 0, step, 2*step, ... within one day.
std::vector<Instance> window_instances(const std::vector<SensorEvent>& day_events, int day_id,
                                       const Vocabulary& vocab, const WindowingOptions& opt);

// Instance file round-trip:
//   day_id window_start <width tokens> | <separation target tokens> | <label bitmask>
void save_instances(const std::string& path, const std::vector<Instance>& instances);
std::vector<Instance> load_instances(const std::string& path, int n_labels);

} // namespace mrhar

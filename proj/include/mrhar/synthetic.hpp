#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mrhar/events.hpp"

namespace mrhar {

// Two independent resident processes walking over per-activity sensor blocks.
// Each resident owns a zone of n_classes*sensors_per_activity sensors;
// overlap in [0,1] controls how many sensors the zones share (0 = disjoint,
// 1 = identical), which is what makes separation progressively harder.
struct SyntheticConfig {
    int days = 4;
    int events_per_day = 1600;    // both residents combined
    int n_classes = 6;
    int sensors_per_activity = 2;
    double overlap = 0.0;
    double event_rate = 0.2;      // events per second, per resident
    int dwell_events = 40;        // per-resident events between activity switches
    uint64_t seed = 1;
};

// Deterministic under seed; events of one day come back interleaved by
// timestamp with full resident/activity annotations.
std::vector<std::vector<SensorEvent>> generate_synthetic(const SyntheticConfig& cfg);

// Writes day files in the CASAS-style format (day_01.txt, ...) so the normal
// ingestion path can consume them.
std::vector<std::string> write_synthetic_days(const SyntheticConfig& cfg, const std::string& dir);

} // namespace mrhar

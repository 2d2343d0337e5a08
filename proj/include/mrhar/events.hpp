#pragma once
#include <string>

namespace mrhar {

// One timestamped ambient-sensor reading. Annotations are 1-based resident
// ids and 0-based activity class indices; -1 / 0 mean "not annotated".
// act_of holds the per-resident activity pair filled in by
// complete_second_labels (-1 = that resident has not acted yet).
struct SensorEvent {
    double time = 0;           // seconds on a fixed absolute scale, for ordering
    std::string timestamp;     // original "date time" text
    std::string sensor;
    std::string value;
    int resident = 0;          // triggering resident
    int activity = -1;         // activity of the triggering resident
    int other_resident = 0;    // second annotation pair, when the line carries one
    int other_activity = -1;
    int act_of[2] = {-1, -1};

    std::string token() const { return sensor + ":" + value; }
};

} // namespace mrhar

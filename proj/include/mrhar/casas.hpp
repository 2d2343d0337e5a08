#pragma once
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "mrhar/events.hpp"

namespace mrhar {

// Activity-label corrections, old token -> new token, applied to the raw
// annotation fields before anything else reads them.
using CorrectionTable = std::map<std::string, std::string>;
CorrectionTable load_corrections(const std::string& path);

struct ParseResult {
    std::vector<SensorEvent> events;
    std::vector<std::string> diagnostics; // malformed/skipped lines, one note each
    int one_pair_lines = 0;               // lines with a single resident/activity pair
    int two_pair_lines = 0;               // lines annotating both residents
    bool out_of_order = false;            // timestamps needed re-sorting
};

// Whitespace-delimited day file: date time sensor value resident activity
// [resident activity]. Malformed lines are collected, not silently dropped;
// events come out stably sorted by timestamp.
ParseResult parse_casas(std::istream& in, const CorrectionTable& corrections = {});
ParseResult parse_casas_file(const std::string& path, const CorrectionTable& corrections = {});

// "YYYY-MM-DD HH:MM:SS[.frac]" -> seconds on an absolute scale.
double parse_timestamp(const std::string& date, const std::string& time);
std::string format_timestamp(double seconds);

} // namespace mrhar

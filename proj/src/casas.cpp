#include "mrhar/casas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mrhar/errors.hpp"

namespace mrhar {

namespace {

// Civil-date <-> day-count conversion (proleptic Gregorian).
long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    long era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, int& m, int& d) {
    z += 719468;
    long era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long yy = static_cast<long>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

bool parse_int(const std::string& s, int& out) {
    if (s.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stoi(s, &pos);
    } catch (...) {
        return false;
    }
    return pos == s.size();
}

} // namespace

double parse_timestamp(const std::string& date, const std::string& time) {
    int y, mo, d, h, mi;
    double sec;
    if (std::sscanf(date.c_str(), "%d-%d-%d", &y, &mo, &d) != 3)
        throw DataError("timestamp: bad date '" + date + "'");
    if (std::sscanf(time.c_str(), "%d:%d:%lf", &h, &mi, &sec) != 3)
        throw DataError("timestamp: bad time '" + time + "'");
    return static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

std::string format_timestamp(double seconds) {
    long day = static_cast<long>(std::floor(seconds / 86400.0));
    double rem = seconds - static_cast<double>(day) * 86400.0;
    int y, mo, d;
    civil_from_days(day, y, mo, d);
    int h = static_cast<int>(rem / 3600.0);
    rem -= h * 3600.0;
    int mi = static_cast<int>(rem / 60.0);
    rem -= mi * 60.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%08.5f", y, mo, d, h, mi, rem);
    return buf;
}

CorrectionTable load_corrections(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("corrections: cannot open '" + path + "'");
    CorrectionTable table;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string from, to, extra;
        if (!(ls >> from)) continue; // blank
        if (from[0] == '#') continue;
        if (!(ls >> to) || (ls >> extra))
            throw DataError("corrections: line " + std::to_string(lineno) +
                            " must have exactly two columns");
        table[from] = to;
    }
    return table;
}

ParseResult parse_casas(std::istream& in, const CorrectionTable& corrections) {
    ParseResult result;
    std::string line;
    int lineno = 0;
    double prev_time = -1e300;
    std::set<int> residents_seen;

    auto correct = [&corrections](const std::string& label) {
        auto it = corrections.find(label);
        return it == corrections.end() ? label : it->second;
    };

    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> fields;
        std::string f;
        while (ls >> f) fields.push_back(f);

        if (fields.empty() || fields[0][0] == '#') {
            if (!line.empty())
                result.diagnostics.push_back("line " + std::to_string(lineno) + ": skipped");
            continue;
        }
        if (fields.size() != 6 && fields.size() != 8) {
            result.diagnostics.push_back("line " + std::to_string(lineno) + ": expected 6 or 8 fields, got " +
                                         std::to_string(fields.size()));
            continue;
        }

        SensorEvent ev;
        try {
            ev.time = parse_timestamp(fields[0], fields[1]);
        } catch (const DataError& e) {
            result.diagnostics.push_back("line " + std::to_string(lineno) + ": " + e.what());
            continue;
        }
        ev.timestamp = fields[0] + " " + fields[1];
        ev.sensor = fields[2];
        ev.value = fields[3];

        int res, act;
        if (!parse_int(fields[4], res) || !parse_int(correct(fields[5]), act)) {
            result.diagnostics.push_back("line " + std::to_string(lineno) +
                                         ": unparseable annotation pair '" + fields[4] + " " +
                                         fields[5] + "'");
            continue;
        }
        ev.resident = res;
        ev.activity = act - 1; // file ids are 1-based
        residents_seen.insert(res);

        if (fields.size() == 8) {
            int res2, act2;
            if (!parse_int(fields[6], res2) || !parse_int(correct(fields[7]), act2)) {
                result.diagnostics.push_back("line " + std::to_string(lineno) +
                                             ": unparseable second annotation pair");
                continue;
            }
            ev.other_resident = res2;
            ev.other_activity = act2 - 1;
            residents_seen.insert(res2);
            result.two_pair_lines++;
        } else {
            result.one_pair_lines++;
        }

        if (ev.time < prev_time) result.out_of_order = true;
        prev_time = ev.time;
        result.events.push_back(std::move(ev));
    }

    if (residents_seen.size() > 2)
        throw DataError("parse: day file annotates " + std::to_string(residents_seen.size()) +
                        " distinct residents, at most 2 supported");
    if (result.out_of_order) {
        result.diagnostics.push_back("timestamps out of order, events re-sorted");
        std::stable_sort(result.events.begin(), result.events.end(),
                         [](const SensorEvent& a, const SensorEvent& b) { return a.time < b.time; });
    }
    return result;
}

ParseResult parse_casas_file(const std::string& path, const CorrectionTable& corrections) {
    std::ifstream in(path);
    if (!in) throw IoError("parse: cannot open '" + path + "'");
    return parse_casas(in, corrections);
}

} // namespace mrhar

#include "mrhar/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mrhar/casas.hpp"
#include "mrhar/errors.hpp"
#include "mrhar/rng.hpp"

namespace mrhar {

namespace {

std::string sensor_name(int idx) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "M%02d", idx + 1);
    return buf;
}

} // namespace

std::vector<std::vector<SensorEvent>> generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.overlap < 0.0 || cfg.overlap > 1.0)
        throw ConfigError("synthetic: overlap must be in [0,1], got " + std::to_string(cfg.overlap));
    if (cfg.days < 1 || cfg.events_per_day < 2 || cfg.n_classes < 1 ||
        cfg.sensors_per_activity < 1 || cfg.event_rate <= 0 || cfg.dwell_events < 1)
        throw ConfigError("synthetic: bad generator configuration");

    int zone = cfg.n_classes * cfg.sensors_per_activity;
    int shared = static_cast<int>(std::lround(cfg.overlap * zone));
    // resident 1 owns sensors [0, zone); resident 2 owns [zone-shared, 2*zone-shared)
    int zone_base[2] = {0, zone - shared};

    double day0 = parse_timestamp("2024-01-01", "08:00:00");
    std::vector<std::vector<SensorEvent>> days;
    days.reserve(cfg.days);

    for (int day = 0; day < cfg.days; ++day) {
        std::vector<SensorEvent> merged;
        for (int r = 0; r < 2; ++r) {
            Rng rng(Rng(cfg.seed).fork(day * 2 + r).engine()());
            double t = day0 + day * 86400.0;
            int n_events = cfg.events_per_day / 2 + (r == 0 ? cfg.events_per_day % 2 : 0);
            int activity = static_cast<int>(rng.index(cfg.n_classes));
            for (int i = 0; i < n_events; ++i) {
                if (i > 0 && i % cfg.dwell_events == 0)
                    activity = static_cast<int>(rng.index(cfg.n_classes));
                t += rng.exponential(cfg.event_rate);
                int pick = static_cast<int>(rng.index(cfg.sensors_per_activity));
                int sensor = zone_base[r] + activity * cfg.sensors_per_activity + pick;
                SensorEvent ev;
                ev.time = t;
                ev.timestamp = format_timestamp(t);
                ev.sensor = sensor_name(sensor);
                ev.value = "ON";
                ev.resident = r + 1;
                ev.activity = activity;
                merged.push_back(std::move(ev));
            }
        }
        std::stable_sort(merged.begin(), merged.end(),
                         [](const SensorEvent& a, const SensorEvent& b) { return a.time < b.time; });
        days.push_back(std::move(merged));
    }
    return days;
}

std::vector<std::string> write_synthetic_days(const SyntheticConfig& cfg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto days = generate_synthetic(cfg);
    std::vector<std::string> paths;
    for (size_t d = 0; d < days.size(); ++d) {
        char name[32];
        std::snprintf(name, sizeof name, "day_%02zu.txt", d + 1);
        std::string path = dir + "/" + name;
        std::ofstream out(path);
        if (!out) throw IoError("synthetic: cannot open '" + path + "' for writing");
        for (const auto& e : days[d])
            out << e.timestamp << " " << e.sensor << " " << e.value << " " << e.resident << " "
                << e.activity + 1 << "\n";
        paths.push_back(path);
    }
    return paths;
}

} // namespace mrhar

#pragma once

#include "nudgekit/geo.hpp"
#include "nudgekit/time.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace nudgekit {

enum class AppType { communication, video, music, reading, game, other };
inline constexpr int kAppTypeCount = 6;

const char* to_string(AppType t);
AppType app_type_from_string(const std::string& s);

struct LocationFix {
    double lat = 0.0;
    double lon = 0.0;
};

struct MovementSample {
    double magnitude = 0.0; // m/s^2
};

struct LightSample {
    double lux = 0.0;
};

struct NoiseSample {
    double level_db = 0.0;
};

struct ScreenEvent {
    bool on = false;
};

struct AppEvent {
    std::string app_id;
    AppType type = AppType::other;
    bool start = false;
};

struct WeatherSample {
    double temp_c = 0.0;
    double humidity_pct = 0.0;
};

using EventPayload = std::variant<LocationFix, MovementSample, LightSample, NoiseSample,
                                  ScreenEvent, AppEvent, WeatherSample>;

struct Event {
    TimePoint t = 0; // UTC epoch seconds
    EventPayload payload;

    template <typename T>
    bool is() const {
        return std::holds_alternative<T>(payload);
    }
    template <typename T>
    const T& as() const {
        return std::get<T>(payload);
    }
};

const char* kind_name(const Event& e);

struct EventLog {
    std::string subject_id;
    std::vector<Event> events; // ordered by t
    bool empty() const { return events.empty(); }
    TimePoint span_begin() const { return events.empty() ? 0 : events.front().t; }
    TimePoint span_end() const { return events.empty() ? 0 : events.back().t; }
};

struct IngestReport {
    std::size_t total_lines = 0;
    std::size_t parsed = 0;
    std::vector<std::string> warnings; // malformed lines, invariant violations
};

// One JSON record per line, e.g.
//   {"t":"2024-03-01T22:05:00Z","kind":"movement","magnitude":2.31}
// Malformed lines are counted and reported, never silently dropped.
// Throws DataError when more than 1% of lines are malformed or a timestamp
// regresses by over an hour (corrupt trace).
EventLog ingest_events(const std::vector<std::string>& lines, IngestReport* report = nullptr,
                       const std::string& subject_id = "");

// Streaming variants; `path` ending in .gz is inflated transparently.
EventLog ingest_events_stream(std::istream& in, IngestReport* report = nullptr,
                              const std::string& subject_id = "");
EventLog ingest_events_file(const std::string& path, IngestReport* report = nullptr,
                            const std::string& subject_id = "");

// Serialization of one event to its JSONL line (used by the simulator
// and the trace round-trip tests).
std::string event_to_jsonl(const Event& e);

} // namespace nudgekit

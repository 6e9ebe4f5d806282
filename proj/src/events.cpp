#include "nudgekit/events.hpp"

#include "nudgekit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#ifdef NUDGEKIT_HAVE_ZLIB
#include <zlib.h>
#endif

namespace nudgekit {

using nlohmann::json;

const char* to_string(AppType t) {
    switch (t) {
        case AppType::communication: return "communication";
        case AppType::video: return "video";
        case AppType::music: return "music";
        case AppType::reading: return "reading";
        case AppType::game: return "game";
        case AppType::other: return "other";
    }
    return "other";
}

AppType app_type_from_string(const std::string& s) {
    if (s == "communication") return AppType::communication;
    if (s == "video") return AppType::video;
    if (s == "music") return AppType::music;
    if (s == "reading") return AppType::reading;
    if (s == "game") return AppType::game;
    if (s == "other") return AppType::other;
    throw DataError("unknown app_type: '" + s + "'");
}

const char* kind_name(const Event& e) {
    if (e.is<LocationFix>()) return "location";
    if (e.is<MovementSample>()) return "movement";
    if (e.is<LightSample>()) return "light";
    if (e.is<NoiseSample>()) return "noise";
    if (e.is<ScreenEvent>()) return "screen";
    if (e.is<AppEvent>()) return "app";
    return "weather";
}

namespace {

double require_number(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_number()) {
        throw DataError(std::string("missing numeric field '") + field + "'");
    }
    return it->get<double>();
}

std::string require_string(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) {
        throw DataError(std::string("missing string field '") + field + "'");
    }
    return it->get<std::string>();
}

Event parse_event_line(const std::string& line) {
    json j = json::parse(line); // throws on malformed JSON
    Event e;
    e.t = parse_iso8601(require_string(j, "t"));
    std::string kind = require_string(j, "kind");
    if (kind == "location") {
        e.payload = LocationFix{require_number(j, "lat"), require_number(j, "lon")};
    } else if (kind == "movement") {
        e.payload = MovementSample{require_number(j, "magnitude")};
    } else if (kind == "light") {
        e.payload = LightSample{require_number(j, "lux")};
    } else if (kind == "noise") {
        e.payload = NoiseSample{require_number(j, "level")};
    } else if (kind == "screen") {
        std::string state = require_string(j, "state");
        if (state != "on" && state != "off") throw DataError("screen state must be on|off");
        e.payload = ScreenEvent{state == "on"};
    } else if (kind == "app") {
        std::string ev = require_string(j, "event");
        if (ev != "start" && ev != "stop") throw DataError("app event must be start|stop");
        e.payload = AppEvent{require_string(j, "app_id"),
                             app_type_from_string(require_string(j, "app_type")), ev == "start"};
    } else if (kind == "weather") {
        e.payload = WeatherSample{require_number(j, "temp"), require_number(j, "humidity")};
    } else {
        throw DataError("unknown kind: '" + kind + "'");
    }
    return e;
}

template <typename LineFn>
EventLog ingest_impl(LineFn&& next_line, IngestReport* report, const std::string& subject_id) {
    EventLog log;
    log.subject_id = subject_id;
    IngestReport local;
    IngestReport& rep = report ? *report : local;

    std::string line;
    std::size_t line_no = 0;
    TimePoint prev_t = 0;
    bool have_prev = false;
    while (next_line(line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++rep.total_lines;
        bool parsed_ok = false;
        Event e;
        try {
            e = parse_event_line(line);
            parsed_ok = true;
        } catch (const DataError& err) {
            rep.warnings.push_back("line " + std::to_string(line_no) + ": " + err.what());
        } catch (const json::exception& err) {
            rep.warnings.push_back("line " + std::to_string(line_no) + ": " + err.what());
        }
        if (!parsed_ok) continue;
        if (have_prev && e.t < prev_t - 3600) {
            throw DataError("corrupt trace: timestamp regresses by >1h at line " +
                            std::to_string(line_no));
        }
        prev_t = e.t;
        have_prev = true;
        log.events.push_back(std::move(e));
        ++rep.parsed;
    }

    // corrupt-trace cutoff: >1% malformed, with a small absolute floor so a
    // couple of bad lines in a short trace stay warnings
    std::size_t malformed = rep.total_lines - rep.parsed;
    if (rep.total_lines > 0 && malformed > 2 && malformed * 100 > rep.total_lines) {
        throw DataError("corrupt trace: " + std::to_string(malformed) + "/" +
                        std::to_string(rep.total_lines) + " lines malformed (>1%)");
    }

    std::stable_sort(log.events.begin(), log.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });

    // Soft invariant checks: screen alternation and app start/stop pairing.
    int screen_state = -1;
    std::map<std::string, int> open_apps;
    for (const Event& e : log.events) {
        if (e.is<ScreenEvent>()) {
            int s = e.as<ScreenEvent>().on ? 1 : 0;
            if (s == screen_state) {
                rep.warnings.push_back("screen events do not alternate at t=" +
                                       format_iso8601(e.t));
            }
            screen_state = s;
        } else if (e.is<AppEvent>()) {
            const auto& a = e.as<AppEvent>();
            int& open = open_apps[a.app_id];
            if (a.start) {
                ++open;
            } else if (open <= 0) {
                rep.warnings.push_back("app stop without matching start: " + a.app_id + " at t=" +
                                       format_iso8601(e.t));
            } else {
                --open;
            }
        }
    }
    return log;
}

} // namespace

EventLog ingest_events(const std::vector<std::string>& lines, IngestReport* report,
                       const std::string& subject_id) {
    std::size_t i = 0;
    return ingest_impl(
        [&](std::string& out) {
            if (i >= lines.size()) return false;
            out = lines[i++];
            return true;
        },
        report, subject_id);
}

EventLog ingest_events_stream(std::istream& in, IngestReport* report,
                              const std::string& subject_id) {
    return ingest_impl([&](std::string& out) { return static_cast<bool>(std::getline(in, out)); },
                       report, subject_id);
}

EventLog ingest_events_file(const std::string& path, IngestReport* report,
                            const std::string& subject_id) {
    bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
#ifdef NUDGEKIT_HAVE_ZLIB
        gzFile f = gzopen(path.c_str(), "rb");
        if (!f) throw DataError("cannot open " + path);
        std::string all;
        char buf[1 << 16];
        int n = 0;
        while ((n = gzread(f, buf, sizeof(buf))) > 0) all.append(buf, static_cast<std::size_t>(n));
        gzclose(f);
        std::istringstream in(all);
        return ingest_events_stream(in, report, subject_id);
#else
        throw DataError("gzip input not supported in this build: " + path);
#endif
    }
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return ingest_events_stream(in, report, subject_id);
}

std::string event_to_jsonl(const Event& e) {
    json j;
    j["t"] = format_iso8601(e.t);
    j["kind"] = kind_name(e);
    if (e.is<LocationFix>()) {
        j["lat"] = e.as<LocationFix>().lat;
        j["lon"] = e.as<LocationFix>().lon;
    } else if (e.is<MovementSample>()) {
        j["magnitude"] = e.as<MovementSample>().magnitude;
    } else if (e.is<LightSample>()) {
        j["lux"] = e.as<LightSample>().lux;
    } else if (e.is<NoiseSample>()) {
        j["level"] = e.as<NoiseSample>().level_db;
    } else if (e.is<ScreenEvent>()) {
        j["state"] = e.as<ScreenEvent>().on ? "on" : "off";
    } else if (e.is<AppEvent>()) {
        const auto& a = e.as<AppEvent>();
        j["app_id"] = a.app_id;
        j["app_type"] = to_string(a.type);
        j["event"] = a.start ? "start" : "stop";
    } else {
        const auto& w = e.as<WeatherSample>();
        j["temp"] = w.temp_c;
        j["humidity"] = w.humidity_pct;
    }
    return j.dump();
}

} // namespace nudgekit

#include "nudgekit/correlate.hpp"

#include "nudgekit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace nudgekit::correlate {

using nlohmann::json;

namespace {

struct Session {
    TimePoint begin, end;
    std::string app_id;
};

std::vector<Session> app_sessions_of(const EventLog& log) {
    std::vector<Session> sessions;
    std::map<std::string, std::vector<TimePoint>> open;
    for (const Event& e : log.events) {
        if (!e.is<AppEvent>()) continue;
        const auto& a = e.as<AppEvent>();
        if (a.start) {
            open[a.app_id].push_back(e.t);
        } else {
            auto it = open.find(a.app_id);
            if (it == open.end() || it->second.empty()) continue;
            sessions.push_back({it->second.back(), e.t, a.app_id});
            it->second.pop_back();
        }
    }
    for (auto& [id, starts] : open) {
        for (TimePoint t0 : starts) sessions.push_back({t0, log.span_end(), id});
    }
    return sessions;
}

} // namespace

std::vector<DailyParams> extract_daily_params(std::span<const FeatureRecord> records,
                                              const EventLog& app_events,
                                              std::span<const SleepEpisode> episodes,
                                              const CadenceConfig& cfg,
                                              ExtractWarnings* warnings) {
    std::map<DayId, const SleepEpisode*> by_day;
    for (const SleepEpisode& e : episodes) by_day[e.day_id] = &e;

    std::vector<Session> sessions = app_sessions_of(app_events);

    std::vector<DailyParams> out;
    for (const auto& [day, ep] : by_day) {
        auto prev = by_day.find(day - 1);
        if (prev == by_day.end()) {
            if (warnings) {
                warnings->skipped_days.push_back(format_date(day) +
                                                 ": no episode for the previous day");
            }
            continue;
        }
        const TimePoint wake_prev = prev->second->wake_time;
        const TimePoint bed = ep->bed_time;
        if (bed <= wake_prev) {
            if (warnings) {
                warnings->skipped_days.push_back(format_date(day) + ": empty waking span");
            }
            continue;
        }

        DailyParams p;
        p.day_id = day;
        double light_sum = 0.0, noise_sum = 0.0;
        int light_n = 0, noise_n = 0;
        for (const FeatureRecord& r : records) {
            if (r.slot_start >= wake_prev && r.slot_start < bed) {
                p.daily_steps += r.steps;
                if (r.steps >= cfg.running_steps_per_slot) {
                    p.running_min += 5.0;
                } else if (r.steps >= cfg.walking_steps_per_slot) {
                    p.walking_min += 5.0;
                }
                p.comm_min += r.app_seconds[static_cast<int>(AppType::communication)] / 60.0;
                p.video_min += r.app_seconds[static_cast<int>(AppType::video)] / 60.0;
                p.music_min += r.app_seconds[static_cast<int>(AppType::music)] / 60.0;
                p.reading_min += r.app_seconds[static_cast<int>(AppType::reading)] / 60.0;
                p.gaming_min += r.app_seconds[static_cast<int>(AppType::game)] / 60.0;
            }
            // pre-bed sensor levels over [bed-2h, bed)
            if (r.slot_start >= bed - 7200 && r.slot_start < bed) {
                if (r.light) {
                    light_sum += r.light->avg;
                    ++light_n;
                }
                if (r.noise) {
                    noise_sum += r.noise->avg;
                    ++noise_n;
                }
            }
        }
        if (light_n > 0) p.pre_bed_light = light_sum / light_n;
        if (noise_n > 0) p.pre_bed_noise = noise_sum / noise_n;

        // pre-bed app usage over the closed window [bed-2h, bed]
        for (const Session& s : sessions) {
            if (s.end < bed - 7200 || s.begin > bed) continue;
            TimePoint lo = std::max(s.begin, bed - 7200);
            TimePoint hi = std::min(s.end, bed);
            double minutes = hi > lo ? static_cast<double>(hi - lo) / 60.0 : 0.0;
            p.pre_bed_app_minutes[s.app_id] += minutes;
        }

        p.bed_time_min = minutes_since_anchor(ep->bed_time);
        p.wake_time_min = minutes_since_anchor(ep->wake_time);
        p.sleep_duration_h = ep->duration_min / 60.0;
        p.wakeup_count = ep->wakeup_count;
        out.push_back(std::move(p));
    }
    return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return std::nullopt;
    // single-pass product-moment form (the test oracle uses the two-pass
    // centered form; the two must agree to 1e-9)
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    double dn = static_cast<double>(n);
    double vx = dn * sxx - sx * sx;
    double vy = dn * syy - sy * sy;
    if (vx <= 0.0 || vy <= 0.0) return std::nullopt; // zero variance
    double r = (dn * sxy - sx * sy) / std::sqrt(vx * vy);
    return std::clamp(r, -1.0, 1.0);
}

namespace {

std::vector<std::string> top_app_ids(std::span<const DailyParams> rows, std::size_t top_apps) {
    std::map<std::string, double> totals;
    for (const DailyParams& p : rows) {
        for (const auto& [id, min] : p.pre_bed_app_minutes) totals[id] += min;
    }
    std::vector<std::pair<std::string, double>> order(totals.begin(), totals.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> ids;
    for (const auto& [id, total] : order) {
        if (ids.size() >= top_apps) break;
        ids.push_back(id);
    }
    return ids;
}

using ColumnFn = std::optional<double> (*)(const DailyParams&);

struct NamedColumn {
    std::string name;
    std::vector<std::optional<double>> values;
};

std::vector<NamedColumn> build_columns(std::span<const DailyParams> rows, std::size_t top_apps) {
    std::vector<const DailyParams*> sorted;
    for (const DailyParams& p : rows) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const DailyParams* a, const DailyParams* b) { return a->day_id < b->day_id; });

    std::vector<std::pair<std::string, ColumnFn>> fixed = {
        {"daily_steps", [](const DailyParams& p) { return std::optional<double>(p.daily_steps); }},
        {"walking_min", [](const DailyParams& p) { return std::optional<double>(p.walking_min); }},
        {"running_min", [](const DailyParams& p) { return std::optional<double>(p.running_min); }},
        {"comm_min", [](const DailyParams& p) { return std::optional<double>(p.comm_min); }},
        {"video_min", [](const DailyParams& p) { return std::optional<double>(p.video_min); }},
        {"music_min", [](const DailyParams& p) { return std::optional<double>(p.music_min); }},
        {"reading_min", [](const DailyParams& p) { return std::optional<double>(p.reading_min); }},
        {"gaming_min", [](const DailyParams& p) { return std::optional<double>(p.gaming_min); }},
        {"pre_bed_light", [](const DailyParams& p) { return p.pre_bed_light; }},
        {"pre_bed_noise", [](const DailyParams& p) { return p.pre_bed_noise; }},
        {"bed_time_min", [](const DailyParams& p) { return std::optional<double>(p.bed_time_min); }},
        {"wake_time_min",
         [](const DailyParams& p) { return std::optional<double>(p.wake_time_min); }},
        {"sleep_duration_h",
         [](const DailyParams& p) { return std::optional<double>(p.sleep_duration_h); }},
        {"wakeup_count", [](const DailyParams& p) { return std::optional<double>(p.wakeup_count); }},
    };

    std::vector<NamedColumn> cols;
    for (const auto& [name, fn] : fixed) {
        NamedColumn c{name, {}};
        for (const DailyParams* p : sorted) c.values.push_back(fn(*p));
        cols.push_back(std::move(c));
    }
    for (const std::string& id : top_app_ids(rows, top_apps)) {
        NamedColumn c{"app:" + id, {}};
        for (const DailyParams* p : sorted) {
            auto it = p->pre_bed_app_minutes.find(id);
            c.values.push_back(it == p->pre_bed_app_minutes.end() ? 0.0 : it->second);
        }
        cols.push_back(std::move(c));
    }
    return cols;
}

} // namespace

CorrelationMatrix pearson_matrix(std::span<const DailyParams> rows, int min_n,
                                 std::size_t top_apps) {
    if (rows.size() < static_cast<std::size_t>(min_n)) {
        throw DataError("pearson_matrix: need at least " + std::to_string(min_n) + " days, got " +
                        std::to_string(rows.size()));
    }
    auto cols = build_columns(rows, top_apps);
    const std::size_t k = cols.size();
    CorrelationMatrix m;
    for (auto& c : cols) m.names.push_back(c.name);
    m.r.assign(k, std::vector<std::optional<double>>(k));
    m.n.assign(k, std::vector<int>(k, 0));

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            xs.clear();
            ys.clear();
            for (std::size_t d = 0; d < cols[i].values.size(); ++d) {
                if (cols[i].values[d] && cols[j].values[d]) {
                    xs.push_back(*cols[i].values[d]);
                    ys.push_back(*cols[j].values[d]);
                }
            }
            m.n[i][j] = m.n[j][i] = static_cast<int>(xs.size());
            if (static_cast<int>(xs.size()) < min_n) continue;
            std::optional<double> r = i == j ? pearson(xs, xs) : pearson(xs, ys);
            if (i == j && r) r = 1.0; // exact unit diagonal where variance > 0
            m.r[i][j] = m.r[j][i] = r;
        }
    }
    return m;
}

std::string CorrelationMatrix::to_json() const {
    json j;
    j["names"] = names;
    json vals = json::array(), mask = json::array(), ns = json::array();
    for (std::size_t i = 0; i < r.size(); ++i) {
        json vrow = json::array(), mrow = json::array();
        for (std::size_t jx = 0; jx < r[i].size(); ++jx) {
            if (r[i][jx]) {
                vrow.push_back(*r[i][jx]);
                mrow.push_back(false);
            } else {
                vrow.push_back(nullptr);
                mrow.push_back(true);
            }
        }
        vals.push_back(std::move(vrow));
        mask.push_back(std::move(mrow));
        ns.push_back(n[i]);
    }
    j["r"] = std::move(vals);
    j["absent"] = std::move(mask);
    j["n"] = std::move(ns);
    return j.dump();
}

void CorrelationMatrix::write_csv(std::ostream& out) const {
    out << "parameter";
    for (const auto& name : names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < r.size(); ++i) {
        out << names[i];
        for (std::size_t jx = 0; jx < r[i].size(); ++jx) {
            out << ',';
            if (r[i][jx]) out << *r[i][jx];
        }
        out << '\n';
    }
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<double> z_scores(const std::vector<double>& v) {
    double mu = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    double sd = std::sqrt(ss / static_cast<double>(v.size()));
    std::vector<double> z(v.size(), 0.0);
    if (sd > 0.0) {
        for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - mu) / sd;
    }
    return z;
}

} // namespace

std::vector<std::size_t> top_quartile_days(std::span<const DailyParams> rows, double fraction) {
    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rows[a].day_id < rows[b].day_id;
    });

    std::vector<double> durations, wakeups;
    for (std::size_t i : order) {
        durations.push_back(rows[i].sleep_duration_h);
        wakeups.push_back(rows[i].wakeup_count);
    }
    std::vector<double> zd = z_scores(durations), zw = z_scores(wakeups);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t j = 0; j < order.size(); ++j) scored.push_back({zd[j] - zw[j], order[j]});
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return rows[a.second].day_id < rows[b.second].day_id;
    });
    std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows.size()))));
    std::vector<std::size_t> picked;
    for (std::size_t j = 0; j < k && j < scored.size(); ++j) picked.push_back(scored[j].second);
    std::sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
        return rows[a].day_id < rows[b].day_id;
    });
    return picked;
}

BestProfile best_profile(std::span<const DailyParams> rows, const BestProfileConfig& cfg) {
    if (rows.size() < 8) throw DataError("best_profile: need at least 8 days");
    auto picked = top_quartile_days(rows, cfg.quartile_fraction);

    BestProfile out;
    std::vector<double> steps, beds;
    for (std::size_t i : picked) {
        steps.push_back(rows[i].daily_steps);
        beds.push_back(rows[i].bed_time_min);
    }
    out.best_daily_steps = mean_of(steps);
    out.best_bed_time_min = mean_of(beds);

    // beneficial bed-time band: the sliding window (>= 2 days inside)
    // with the highest mean sleep score
    {
        std::vector<double> durations, wakeups;
        std::vector<const DailyParams*> sorted;
        for (const DailyParams& p : rows) sorted.push_back(&p);
        std::sort(sorted.begin(), sorted.end(),
                  [](const DailyParams* a, const DailyParams* b) { return a->day_id < b->day_id; });
        for (const DailyParams* p : sorted) {
            durations.push_back(p->sleep_duration_h);
            wakeups.push_back(p->wakeup_count);
        }
        std::vector<double> zd = z_scores(durations), zw = z_scores(wakeups);

        double lo = sorted.front()->bed_time_min, hi = lo;
        for (const DailyParams* p : sorted) {
            lo = std::min(lo, p->bed_time_min);
            hi = std::max(hi, p->bed_time_min);
        }
        double best_score = -std::numeric_limits<double>::infinity();
        std::optional<double> best_start;
        for (double s = lo; s <= hi; s += 15.0) {
            double sum = 0.0;
            int n = 0;
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                double b = sorted[i]->bed_time_min;
                if (b >= s && b <= s + cfg.bed_band_minutes) {
                    sum += zd[i] - zw[i];
                    ++n;
                }
            }
            if (n >= 2 && sum / n > best_score + 1e-12) {
                best_score = sum / n;
                best_start = s;
            }
        }
        if (best_start) {
            out.best_bed_time_min =
                std::clamp(out.best_bed_time_min, *best_start, *best_start + cfg.bed_band_minutes);
        }
    }

    for (const std::string& id : top_app_ids(rows, cfg.top_apps)) {
        double sum = 0.0;
        for (std::size_t i : picked) {
            auto it = rows[i].pre_bed_app_minutes.find(id);
            if (it != rows[i].pre_bed_app_minutes.end()) sum += it->second;
        }
        out.best_app_usage_min[id] = sum / static_cast<double>(picked.size());
    }
    return out;
}

std::string BestProfile::to_json() const {
    json j;
    j["best_daily_steps"] = best_daily_steps;
    j["best_bed_time_min"] = best_bed_time_min;
    j["best_app_usage_min"] = best_app_usage_min;
    return j.dump();
}

} // namespace nudgekit::correlate

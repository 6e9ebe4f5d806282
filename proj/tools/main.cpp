// nudgekit command-line front end: ingestion, training, detection,
// correlation, route mining, simulation and report extraction.
#include "nudgekit/config.hpp"
#include "nudgekit/correlate.hpp"
#include "nudgekit/errors.hpp"
#include "nudgekit/sim/scenario.hpp"
#include "nudgekit/sleep/detector.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace nudgekit;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig load_config(const std::string& config_path) {
    return config_path.empty() ? RunConfig{} : RunConfig::parse_file(config_path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

// one analysis day per group, sorted
std::map<DayId, std::vector<FeatureRecord>> records_by_day(
    const std::vector<FeatureRecord>& records) {
    std::map<DayId, std::vector<FeatureRecord>> by_day;
    for (const FeatureRecord& r : records) by_day[analysis_day_of(r.slot_start)].push_back(r);
    return by_day;
}

int cmd_ingest(const std::string& in_path, const std::string& out_dir,
               const std::string& subject, const RunConfig& cfg) {
    ensure_dir(out_dir);
    IngestReport report;
    EventLog log = ingest_events_file(in_path, &report, subject);
    auto records = aggregate_records(log, cfg.step_config());
    std::ostringstream csv;
    write_records_csv(csv, records);
    write_file_atomic(out_dir + "/records.csv", csv.str());
    std::ostringstream warn;
    for (const auto& w : report.warnings) warn << w << '\n';
    write_file_atomic(out_dir + "/warnings.txt", warn.str());
    std::cout << "parsed " << report.parsed << "/" << report.total_lines << " lines, "
              << records.size() << " feature records, " << report.warnings.size()
              << " warnings -> " << out_dir << "/records.csv\n";
    return kExitOk;
}

int cmd_train_sleep(const std::string& corpus_dir, const std::string& out_dir,
                    const RunConfig& cfg) {
    ensure_dir(out_dir);
    sleep::PlaceRegistry registry(cfg.place_radius_m);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .csv labeled-day files under " + corpus_dir);
    std::size_t rows = 0;
    for (const auto& f : files) {
        std::ifstream in(f);
        ml::Dataset ds = ml::read_dataset_csv(in);
        for (const ml::Row& row : ds.rows) {
            LatLon loc{row.features.at(sleep::kLatitude), row.features.at(sleep::kLongitude)};
            registry.append_training_row(registry.assign(loc), row);
            ++rows;
        }
    }
    registry.train_models(std::vector<std::string>(sleep::window_feature_names().begin(),
                                                   sleep::window_feature_names().end()),
                          cfg.classifier_spec(), cfg.seed);
    if (!registry.has_any_model()) {
        throw DataError("corpus produced no trainable model (single-class labels?)");
    }
    write_file_atomic(out_dir + "/models.json", registry.to_json());
    std::cout << "trained on " << rows << " windows across " << registry.places().size()
              << " places -> " << out_dir << "/models.json\n";
    return kExitOk;
}

int cmd_detect_sleep(const std::string& records_path, const std::string& models_path,
                     const std::string& out_dir, const RunConfig& cfg) {
    ensure_dir(out_dir);
    if (!fs::exists(models_path)) {
        throw DataError("no trained model at " + models_path + "; run train-sleep first");
    }
    sleep::PlaceRegistry registry = sleep::PlaceRegistry::from_json(slurp(models_path));
    std::ifstream in(records_path);
    if (!in) throw DataError("cannot open " + records_path);
    auto records = read_records_csv(in);

    sleep::MergeConfig merge{cfg.merge_gap_min, cfg.duration_excludes_absorbed_gaps};
    sleep::SubjectHistory history;
    std::optional<sleep::PrevSleepTimes> prev;
    std::ostringstream episodes;
    std::size_t found = 0;
    for (auto& [day, day_records] : records_by_day(records)) {
        auto windows = sleep::build_windows(day, day_records, prev, &history, cfg.window_min);
        sleep::classify_day(windows, registry);
        if (auto ep = sleep::merge_episodes(windows, merge)) {
            episodes << ep->to_json() << '\n';
            prev = sleep::PrevSleepTimes{minutes_since_anchor(ep->bed_time),
                                         minutes_since_anchor(ep->wake_time)};
            history.observe_episode(prev->bed_minutes, prev->wake_minutes);
            ++found;
        }
    }
    write_file_atomic(out_dir + "/episodes.jsonl", episodes.str());
    std::cout << "detected " << found << " sleep episodes -> " << out_dir << "/episodes.jsonl\n";
    return kExitOk;
}

int cmd_correlate(const std::string& records_path, const std::string& trace_path,
                  const std::string& episodes_path, const std::string& out_dir,
                  const RunConfig& cfg) {
    ensure_dir(out_dir);
    std::ifstream rin(records_path);
    if (!rin) throw DataError("cannot open " + records_path);
    auto records = read_records_csv(rin);
    EventLog trace = ingest_events_file(trace_path);
    std::vector<sleep::SleepEpisode> episodes;
    {
        std::ifstream ein(episodes_path);
        if (!ein) throw DataError("cannot open " + episodes_path);
        std::string line;
        while (std::getline(ein, line)) {
            if (!line.empty()) episodes.push_back(sleep::SleepEpisode::from_json(line));
        }
    }
    correlate::CadenceConfig cadence{cfg.walking_steps_per_slot, cfg.running_steps_per_slot};
    correlate::ExtractWarnings warnings;
    auto params = correlate::extract_daily_params(records, trace, episodes, cadence, &warnings);
    auto matrix = correlate::pearson_matrix(params, cfg.min_pair_days,
                                            static_cast<std::size_t>(cfg.top_apps));
    std::ostringstream matrix_csv;
    matrix.write_csv(matrix_csv);
    write_file_atomic(out_dir + "/matrix.csv", matrix_csv.str());
    write_file_atomic(out_dir + "/matrix.json", matrix.to_json());
    correlate::BestProfileConfig bp;
    bp.quartile_fraction = cfg.quartile_fraction;
    bp.top_apps = static_cast<std::size_t>(cfg.top_apps);
    auto best = correlate::best_profile(params, bp);
    write_file_atomic(out_dir + "/best_profile.json", best.to_json());
    for (const auto& w : warnings.skipped_days) log_line("correlate: skipped " + w);
    std::cout << "correlated " << params.size() << " days (" << warnings.skipped_days.size()
              << " skipped) -> " << out_dir << "/matrix.csv, best_profile.json\n";
    return kExitOk;
}

std::vector<traj::TrackPoint> gpx_track_points(const std::string& text) {
    // minimal GPX reader: <trkpt lat=".." lon=".."> ... <time>...</time>
    std::vector<traj::TrackPoint> fixes;
    std::size_t pos = 0;
    while ((pos = text.find("<trkpt", pos)) != std::string::npos) {
        std::size_t end = text.find("</trkpt>", pos);
        if (end == std::string::npos) break;
        std::string chunk = text.substr(pos, end - pos);
        auto attr = [&chunk](const char* name) -> std::optional<double> {
            std::size_t a = chunk.find(std::string(name) + "=\"");
            if (a == std::string::npos) return std::nullopt;
            a += std::string(name).size() + 2;
            std::size_t b = chunk.find('"', a);
            if (b == std::string::npos) return std::nullopt;
            return std::stod(chunk.substr(a, b - a));
        };
        auto lat = attr("lat");
        auto lon = attr("lon");
        std::size_t t0 = chunk.find("<time>");
        std::size_t t1 = chunk.find("</time>");
        if (lat && lon && t0 != std::string::npos && t1 != std::string::npos) {
            TimePoint t = parse_iso8601(chunk.substr(t0 + 6, t1 - t0 - 6));
            fixes.push_back({t, *lat, *lon});
        }
        pos = end + 8;
    }
    std::sort(fixes.begin(), fixes.end(),
              [](const traj::TrackPoint& a, const traj::TrackPoint& b) { return a.t < b.t; });
    return fixes;
}

int cmd_mine_routes(const std::string& trace_path, const std::string& gpx_path,
                    const std::string& out_dir, const RunConfig& cfg) {
    ensure_dir(out_dir);
    std::vector<traj::TrackPoint> fixes;
    std::vector<FeatureRecord> records;
    if (!gpx_path.empty()) {
        fixes = gpx_track_points(slurp(gpx_path));
    } else {
        EventLog log = ingest_events_file(trace_path);
        for (const Event& e : log.events) {
            if (e.is<LocationFix>()) {
                fixes.push_back({e.t, e.as<LocationFix>().lat, e.as<LocationFix>().lon});
            }
        }
        records = aggregate_records(log, cfg.step_config());
    }
    if (fixes.empty()) throw DataError("no location fixes in input");

    sim::GridWorld::Config wc;
    wc.width = cfg.grid_width;
    wc.height = cfg.grid_height;
    wc.edge_m = cfg.edge_m;
    wc.k_alternatives = cfg.k_alternatives;
    // the offline street-name provider; fit the grid origin under the data
    wc.base_lat = fixes.front().lat;
    wc.base_lon = fixes.front().lon;
    for (const auto& f : fixes) {
        wc.base_lat = std::min(wc.base_lat, f.lat);
        wc.base_lon = std::min(wc.base_lon, f.lon);
    }
    sim::GridWorld world(wc);

    traj::SegmentConfig seg_cfg{cfg.poi_cluster_m, cfg.jump_filter_m, cfg.poi_min_dwell_s};
    traj::MiningConfig mine_cfg;
    mine_cfg.similarity.tau_fraction = cfg.tau_fraction;
    mine_cfg.similarity.character_level = cfg.char_level_similarity;
    mine_cfg.min_occurrence = cfg.min_occurrence;

    std::map<DayId, std::vector<traj::TrackPoint>> by_day;
    for (const auto& f : fixes) by_day[analysis_day_of(f.t)].push_back(f);
    std::vector<traj::MinedRoute> mined;
    json pois = json::array();
    for (auto& [day, day_fixes] : by_day) {
        if (is_weekend(day)) continue;
        auto seg = traj::segment_routes(day_fixes, day, seg_cfg);
        std::string prefix = "d" + std::to_string(day) + "_";
        for (auto& poi : seg.pois) {
            pois.push_back({{"poi_id", prefix + poi.poi_id},
                            {"lat", poi.centroid.lat},
                            {"lon", poi.centroid.lon},
                            {"members", poi.member_count}});
        }
        if (!records.empty()) traj::attach_steps(seg.routes, records);
        for (auto& route : seg.routes) {
            if (route.start_poi.empty() || route.end_poi.empty()) continue;
            route.start_poi = prefix + route.start_poi;
            route.end_poi = prefix + route.end_poi;
            try {
                std::string streets = traj::route_string(route, world);
                mined.push_back({std::move(route), std::move(streets)});
            } catch (const DataError&) {
            }
        }
    }
    auto patterns = traj::mine_patterns(std::move(mined), mine_cfg);
    json out = json::array();
    for (const auto& p : patterns) out.push_back(json::parse(p.to_json()));
    write_file_atomic(out_dir + "/patterns.json", out.dump(2) + "\n");
    write_file_atomic(out_dir + "/pois.json", pois.dump(2) + "\n");
    std::cout << "mined " << patterns.size() << " recurring patterns -> " << out_dir
              << "/patterns.json\n";
    return kExitOk;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
    RunConfig cfg = load_config(config_path);
    ensure_dir(out_dir);
    sim::ScenarioConfig sc = cfg.scenario_config();
    log_line("simulate: " + std::to_string(sc.n_subjects) + " subjects, " +
             std::to_string(sc.days) + " days, " + std::to_string(sc.arms.size()) + " arms");
    sim::ScenarioReport report = sim::run_scenario(sc, seed);
    write_file_atomic(out_dir + "/report.json", report.to_json() + "\n");

    auto write_fig = [&](const char* name, auto writer) {
        std::ostringstream os;
        (report.*writer)(os);
        write_file_atomic(out_dir + "/" + name, os.str());
    };
    write_fig("fig13_funnel.csv", &sim::ScenarioReport::write_fig13_funnel_csv);
    write_fig("fig15_steps.csv", &sim::ScenarioReport::write_fig15_steps_csv);
    write_fig("fig16_acceptance.csv", &sim::ScenarioReport::write_fig16_acceptance_csv);
    write_fig("fig18_bedding.csv", &sim::ScenarioReport::write_fig18_bedding_csv);
    if (!report.sleep_eval.empty()) {
        write_fig("fig6_metrics.csv", &sim::ScenarioReport::write_fig6_metrics_csv);
        write_fig("fig7_curve.csv", &sim::ScenarioReport::write_fig7_curve_csv);
    }
    for (const auto& arm : report.arms) {
        for (const auto& [subject, lines] : arm.advice_logs) {
            std::ostringstream os;
            for (const auto& line : lines) os << line << '\n';
            write_file_atomic(out_dir + "/advice_" + to_string(arm.arm) + "_" + subject +
                                  ".jsonl",
                              os.str());
        }
    }
    std::cout << "scenario complete -> " << out_dir << "/report.json\n";
    return kExitOk;
}

int cmd_report(const std::string& run_dir, const std::string& figure) {
    json report = json::parse(slurp(run_dir + "/report.json"));
    std::ostringstream os;
    if (figure == "fig13") {
        os << "arm,kind,generated,seen,accepted,acceptance_rate\n";
        for (const auto& arm : report.at("arms")) {
            for (auto it = arm.at("funnel_by_kind").begin(); it != arm.at("funnel_by_kind").end();
                 ++it) {
                os << arm.at("arm").get<std::string>() << ',' << it.key() << ','
                   << it.value().at("generated") << ',' << it.value().at("seen") << ','
                   << it.value().at("accepted") << ',' << it.value().at("acceptance_rate")
                   << '\n';
            }
        }
    } else if (figure == "fig15") {
        os << "weekday_index,arm,mean_steps\n";
        for (const auto& arm : report.at("arms")) {
            const auto& steps = arm.at("weekday_steps_during");
            for (std::size_t d = 0; d < steps.size(); ++d) {
                os << d << ',' << arm.at("arm").get<std::string>() << ','
                   << steps[d].get<double>() << '\n';
            }
        }
    } else if (figure == "fig16") {
        os << "arm,break_generated,break_seen,break_accepted,acceptance_rate\n";
        for (const auto& arm : report.at("arms")) {
            int g = 0, s = 0, a = 0;
            double rate = 0.0;
            if (arm.at("funnel_by_kind").contains("break")) {
                const auto& f = arm.at("funnel_by_kind").at("break");
                g = f.at("generated").get<int>();
                s = f.at("seen").get<int>();
                a = f.at("accepted").get<int>();
                rate = f.at("acceptance_rate").get<double>();
            }
            os << arm.at("arm").get<std::string>() << ',' << g << ',' << s << ',' << a << ','
               << rate << '\n';
        }
    } else if (figure == "fig18") {
        os << "arm,bed_variance_before_min2,bed_variance_after_min2,duration_before_h,"
              "duration_after_h\n";
        for (const auto& arm : report.at("arms")) {
            os << arm.at("arm").get<std::string>() << ',' << arm.at("bed_variance_before_min2")
               << ',' << arm.at("bed_variance_after_min2") << ','
               << arm.at("sleep_duration_mean_before_h") << ','
               << arm.at("sleep_duration_mean_after_h") << '\n';
        }
    } else {
        throw ConfigError("unknown figure '" + figure + "' (fig13|fig15|fig16|fig18)");
    }
    std::string path = run_dir + "/" + figure + (figure == "fig13"   ? "_funnel.csv"
                                                 : figure == "fig15" ? "_steps.csv"
                                                 : figure == "fig16" ? "_acceptance.csv"
                                                                     : "_bedding.csv");
    write_file_atomic(path, os.str());
    std::cout << path << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nudgekit: sleep detection, correlation, route mining and nudging simulator"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_dir = "out", subject = "s0";
    std::string corpus_dir, records_path, models_path, trace_path, episodes_path, gpx_path;
    std::string run_dir, figure;
    std::uint64_t seed = 0;

    auto* ingest = app.add_subcommand("ingest", "ingest a JSONL trace into feature records");
    ingest->add_option("--in", in_path, "trace .jsonl or .jsonl.gz")->required();
    ingest->add_option("--out", out_dir, "output directory");
    ingest->add_option("--subject", subject, "subject id");
    ingest->add_option("--config", config_path, "config file");

    auto* train = app.add_subcommand("train-sleep", "train place-partitioned sleep models");
    train->add_option("--corpus", corpus_dir, "directory of labeled-day CSVs")->required();
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--config", config_path, "config file");

    auto* detect = app.add_subcommand("detect-sleep", "detect sleep episodes from records");
    detect->add_option("--records", records_path, "records.csv from ingest")->required();
    detect->add_option("--models", models_path, "models.json from train-sleep")->required();
    detect->add_option("--out", out_dir, "output directory");
    detect->add_option("--config", config_path, "config file");

    auto* correlate_cmd = app.add_subcommand("correlate", "daily parameters, Pearson matrix, best profile");
    correlate_cmd->add_option("--records", records_path, "records.csv")->required();
    correlate_cmd->add_option("--trace", trace_path, "raw trace (app events)")->required();
    correlate_cmd->add_option("--episodes", episodes_path, "episodes.jsonl")->required();
    correlate_cmd->add_option("--out", out_dir, "output directory");
    correlate_cmd->add_option("--config", config_path, "config file");

    auto* mine = app.add_subcommand("mine-routes", "mine recurring walking trajectories");
    mine->add_option("--trace", trace_path, "trace .jsonl");
    mine->add_option("--gpx", gpx_path, "GPX track file");
    mine->add_option("--out", out_dir, "output directory");
    mine->add_option("--config", config_path, "config file");

    auto* simulate = app.add_subcommand("simulate", "run an end-to-end synthetic scenario");
    simulate->add_option("--config", config_path, "config file");
    simulate->add_option("--seed", seed, "master seed")->required();
    simulate->add_option("--out", out_dir, "output directory");

    auto* report_cmd = app.add_subcommand("report", "re-emit a figure table from a run");
    report_cmd->add_option("--run", run_dir, "simulate output directory")->required();
    report_cmd->add_option("--figure", figure, "fig13|fig15|fig16|fig18")->required();

    auto* print_cfg = app.add_subcommand("print-config", "dump the effective configuration");
    print_cfg->add_option("--config", config_path, "config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(in_path, out_dir, subject, load_config(config_path));
        if (train->parsed()) return cmd_train_sleep(corpus_dir, out_dir, load_config(config_path));
        if (detect->parsed()) {
            return cmd_detect_sleep(records_path, models_path, out_dir, load_config(config_path));
        }
        if (correlate_cmd->parsed()) {
            return cmd_correlate(records_path, trace_path, episodes_path, out_dir,
                                 load_config(config_path));
        }
        if (mine->parsed()) {
            if (trace_path.empty() && gpx_path.empty()) {
                throw ConfigError("mine-routes needs --trace or --gpx");
            }
            return cmd_mine_routes(trace_path, gpx_path, out_dir, load_config(config_path));
        }
        if (simulate->parsed()) return cmd_simulate(config_path, seed, out_dir);
        if (report_cmd->parsed()) return cmd_report(run_dir, figure);
        if (print_cfg->parsed()) {
            std::cout << load_config(config_path).serialize();
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}

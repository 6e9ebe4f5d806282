#include "nudgekit/config.hpp"

#include "nudgekit/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace nudgekit {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

struct Binding {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// section -> ordered (key, binding) list
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Binding>>>>&
schema() {
    auto dbl = [](double RunConfig::* f) {
        return Binding{[f](RunConfig& c, const std::string& v) { c.*f = std::stod(v); },
                       [f](const RunConfig& c) { return fmt_double(c.*f); }};
    };
    auto integer = [](int RunConfig::* f) {
        return Binding{[f](RunConfig& c, const std::string& v) { c.*f = std::stoi(v); },
                       [f](const RunConfig& c) { return std::to_string(c.*f); }};
    };
    auto boolean = [](bool RunConfig::* f) {
        return Binding{[f](RunConfig& c, const std::string& v) {
                           c.*f = parse_bool(v, "boolean");
                       },
                       [f](const RunConfig& c) { return c.*f ? "true" : "false"; }};
    };
    auto str = [](std::string RunConfig::* f) {
        return Binding{[f](RunConfig& c, const std::string& v) { c.*f = v; },
                       [f](const RunConfig& c) { return c.*f; }};
    };
    auto u64 = [](std::uint64_t RunConfig::* f) {
        return Binding{[f](RunConfig& c, const std::string& v) { c.*f = std::stoull(v); },
                       [f](const RunConfig& c) { return std::to_string(c.*f); }};
    };

    static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Binding>>>>
        s = {
            {"paths", {{"out", str(&RunConfig::out_dir)}}},
            {"run", {{"seed", u64(&RunConfig::seed)}}},
            {"core",
             {{"step_threshold", dbl(&RunConfig::step_threshold)},
              {"step_refractory_s", dbl(&RunConfig::step_refractory_s)}}},
            {"sleep",
             {{"window_min", integer(&RunConfig::window_min)},
              {"merge_gap_min", dbl(&RunConfig::merge_gap_min)},
              {"place_radius_m", dbl(&RunConfig::place_radius_m)},
              {"model", str(&RunConfig::sleep_model)},
              {"knn_k", integer(&RunConfig::knn_k)},
              {"forest_trees", integer(&RunConfig::forest_trees)},
              {"tree_max_depth", integer(&RunConfig::tree_max_depth)},
              {"duration_excludes_absorbed_gaps",
               boolean(&RunConfig::duration_excludes_absorbed_gaps)}}},
            {"correlate",
             {{"quartile_fraction", dbl(&RunConfig::quartile_fraction)},
              {"walking_steps_per_slot", dbl(&RunConfig::walking_steps_per_slot)},
              {"running_steps_per_slot", dbl(&RunConfig::running_steps_per_slot)},
              {"min_pair_days", integer(&RunConfig::min_pair_days)},
              {"top_apps", integer(&RunConfig::top_apps)}}},
            {"routes",
             {{"poi_cluster_m", dbl(&RunConfig::poi_cluster_m)},
              {"poi_min_dwell_s", dbl(&RunConfig::poi_min_dwell_s)},
              {"jump_filter_m", dbl(&RunConfig::jump_filter_m)},
              {"tau_fraction", dbl(&RunConfig::tau_fraction)},
              {"char_level_similarity", boolean(&RunConfig::char_level_similarity)},
              {"min_occurrence", integer(&RunConfig::min_occurrence)},
              {"selection_strategy", str(&RunConfig::selection_strategy)}}},
            {"nudge",
             {{"advice_lead_min", dbl(&RunConfig::advice_lead_min)},
              {"scan_period_min", dbl(&RunConfig::scan_period_min)},
              {"sleep_check_period_min", dbl(&RunConfig::sleep_check_period_min)},
              {"break_min_gap_min", dbl(&RunConfig::break_min_gap_min)},
              {"bedtime_lead_min", dbl(&RunConfig::bedtime_lead_min)},
              {"max_consecutive_rejections", integer(&RunConfig::max_consecutive_rejections)},
              {"break_movement_std_min", dbl(&RunConfig::break_movement_std_min)},
              {"bedtime_volume_factor", dbl(&RunConfig::bedtime_volume_factor)}}},
            {"world",
             {{"grid_width", integer(&RunConfig::grid_width)},
              {"grid_height", integer(&RunConfig::grid_height)},
              {"edge_m", dbl(&RunConfig::edge_m)},
              {"k_alternatives", integer(&RunConfig::k_alternatives)}}},
            {"subjects",
             {{"count", integer(&RunConfig::subject_count)},
              {"days", integer(&RunConfig::days)},
              {"first_day", str(&RunConfig::first_day)},
              {"compliant", boolean(&RunConfig::compliant)},
              {"quantize_sleep", boolean(&RunConfig::quantize_sleep)},
              {"disturbance_rate", dbl(&RunConfig::disturbance_rate)},
              {"stroll_probability", dbl(&RunConfig::stroll_probability)}}},
            {"noise",
             {{"gps_sigma_m", dbl(&RunConfig::gps_sigma_m)},
              {"light_sd", dbl(&RunConfig::light_sd)},
              {"noise_sd", dbl(&RunConfig::noise_sd)},
              {"movement_sd", dbl(&RunConfig::movement_sd)}}},
            {"arms", {{"arms", str(&RunConfig::arms)}}},
            {"report", {{"evaluate_sleep", boolean(&RunConfig::evaluate_sleep)}}},
        };
    return s;
}

} // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            bool known = false;
            for (const auto& [name, keys] : schema()) known |= name == section;
            if (!known) {
                throw ConfigError("unknown config section [" + section + "] at line " +
                                  std::to_string(line_no));
            }
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected key = value at line " + std::to_string(line_no));
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        bool found = false;
        for (const auto& [name, keys] : schema()) {
            if (name != section) continue;
            for (const auto& [k, binding] : keys) {
                if (k == key) {
                    try {
                        binding.set(cfg, value);
                    } catch (const ConfigError&) {
                        throw;
                    } catch (const std::exception&) {
                        throw ConfigError("bad value for " + section + "." + key + ": '" + value +
                                          "'");
                    }
                    found = true;
                    break;
                }
            }
        }
        if (!found) {
            throw ConfigError("unknown config key '" + key + "' in section [" + section +
                              "] at line " + std::to_string(line_no));
        }
    }
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [section, keys] : schema()) {
        if (!first) out << '\n';
        first = false;
        out << '[' << section << "]\n";
        for (const auto& [key, binding] : keys) out << key << " = " << binding.get(*this) << '\n';
    }
    return out.str();
}

ml::ClassifierSpec RunConfig::classifier_spec() const {
    ml::ClassifierSpec spec;
    spec.kind = ml::classifier_kind_from_string(sleep_model);
    spec.n_trees = forest_trees;
    spec.max_depth = tree_max_depth;
    spec.k = knn_k;
    return spec;
}

StepConfig RunConfig::step_config() const { return {step_threshold, step_refractory_s}; }

sim::ScenarioConfig RunConfig::scenario_config() const {
    sim::ScenarioConfig sc;
    sc.world.width = grid_width;
    sc.world.height = grid_height;
    sc.world.edge_m = edge_m;
    sc.world.k_alternatives = k_alternatives;
    sc.n_subjects = subject_count;
    sc.days = days;
    sc.first_day = parse_date(first_day);
    sc.noise = {gps_sigma_m, light_sd, noise_sd, movement_sd};
    sc.disturbance_rate = disturbance_rate;
    sc.stroll_probability = stroll_probability;
    sc.quantize_sleep = quantize_sleep;
    sc.compliant = compliant;
    sc.arms.clear();
    std::string token;
    std::istringstream arms_in(arms);
    while (std::getline(arms_in, token, ',')) {
        token = trim(token);
        if (!token.empty()) sc.arms.push_back(sim::arm_kind_from_string(token));
    }
    sc.sleep_model = classifier_spec();
    sc.engine.scan_period_min = scan_period_min;
    sc.engine.advice_lead_min = advice_lead_min;
    sc.engine.sleep_check_period_min = sleep_check_period_min;
    sc.engine.break_min_gap_min = break_min_gap_min;
    sc.engine.break_movement_std_min = break_movement_std_min;
    sc.engine.bedtime_lead_min = bedtime_lead_min;
    sc.engine.bedtime_volume_factor = bedtime_volume_factor;
    sc.engine.max_consecutive_rejections = max_consecutive_rejections;
    sc.engine.strategy = selection_strategy == "closest_to_gap"
                             ? traj::AlternativeStrategy::closest_to_gap
                             : traj::AlternativeStrategy::smallest_increase;
    sc.merge.gap_min = merge_gap_min;
    sc.merge.duration_excludes_absorbed_gaps = duration_excludes_absorbed_gaps;
    sc.cadence = {walking_steps_per_slot, running_steps_per_slot};
    sc.segment = {poi_cluster_m, jump_filter_m, poi_min_dwell_s};
    sc.mining.similarity.tau_fraction = tau_fraction;
    sc.mining.similarity.character_level = char_level_similarity;
    sc.mining.min_occurrence = min_occurrence;
    sc.evaluate_sleep = evaluate_sleep;
    return sc;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp);
        out << content;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw DataError("cannot rename " + tmp + " to " + path);
    }
}

bool log_enabled() {
    static const bool enabled = [] {
        const char* v = std::getenv("NUDGEKIT_LOG");
        return v != nullptr && std::string(v) != "" && std::string(v) != "0";
    }();
    return enabled;
}

void log_line(const std::string& msg) {
    if (log_enabled()) std::cerr << "[nudgekit] " << msg << '\n';
}

} // namespace nudgekit

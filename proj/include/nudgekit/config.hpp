#pragma once

#include "nudgekit/aggregate.hpp"
#include "nudgekit/ml/classifier.hpp"
#include "nudgekit/sim/scenario.hpp"

#include <cstdint>
#include <string>

namespace nudgekit {

// Every tunable of the pipeline in one sectioned key-value file. Defaults
// carry the constants the services were designed around (10-minute windows,
// 30-minute merge gap, 100 m places, 10 m clusters, 150 m jump filter,
// k=6, 30-minute advice lead, 60-minute bedtime lead, suppression after
// more than 3 rejections). Unknown keys are hard errors.
struct RunConfig {
    // [paths]
    std::string out_dir = "out";
    // [run]
    std::uint64_t seed = 7;
    // [core]
    double step_threshold = 1.5;
    double step_refractory_s = 0.25;
    // [sleep]
    int window_min = 10;
    double merge_gap_min = 30.0;
    double place_radius_m = 100.0;
    std::string sleep_model = "forest";
    int knn_k = 6;
    int forest_trees = 25;
    int tree_max_depth = 12;
    bool duration_excludes_absorbed_gaps = false;
    // [correlate]
    double quartile_fraction = 0.25;
    double walking_steps_per_slot = 60.0;
    double running_steps_per_slot = 130.0;
    int min_pair_days = 5;
    int top_apps = 10;
    // [routes]
    double poi_cluster_m = 10.0;
    double poi_min_dwell_s = 300.0;
    double jump_filter_m = 150.0;
    double tau_fraction = 0.2;
    bool char_level_similarity = false;
    int min_occurrence = 2;
    std::string selection_strategy = "smallest_increase";
    // [nudge]
    double advice_lead_min = 30.0;
    double scan_period_min = 15.0;
    double sleep_check_period_min = 30.0;
    double break_min_gap_min = 30.0;
    double bedtime_lead_min = 60.0;
    int max_consecutive_rejections = 3;
    double break_movement_std_min = 0.02;
    double bedtime_volume_factor = 0.9;
    // [world]
    int grid_width = 20;
    int grid_height = 20;
    double edge_m = 100.0;
    int k_alternatives = 3;
    // [subjects]
    int subject_count = 4;
    int days = 28;
    std::string first_day = "2024-03-04";
    bool compliant = false;
    bool quantize_sleep = false;
    double disturbance_rate = 0.7;
    double stroll_probability = 0.35;
    // [noise]
    double gps_sigma_m = 4.0;
    double light_sd = 12.0;
    double noise_sd = 2.5;
    double movement_sd = 0.04;
    // [arms]
    std::string arms = "context_gated,random_timing,control";
    // [report]
    bool evaluate_sleep = false;

    static RunConfig parse_text(const std::string& text);
    static RunConfig parse_file(const std::string& path);
    std::string serialize() const;

    ml::ClassifierSpec classifier_spec() const;
    StepConfig step_config() const;
    sim::ScenarioConfig scenario_config() const;
};

// temp-file + rename, so readers never observe a half-written file
void write_file_atomic(const std::string& path, const std::string& content);

bool log_enabled();
void log_line(const std::string& msg);

} // namespace nudgekit

#include "nudgekit/config.hpp"
#include "nudgekit/errors.hpp"
#include "nudgekit/sim/subject.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nudgekit;
namespace fs = std::filesystem;

namespace {

#ifndef NUDGEKIT_CLI_PATH
#define NUDGEKIT_CLI_PATH "./nudgekit"
#endif

struct CliResult {
    int exit_code = -1;
    std::string stdout_text;
};

CliResult run_cli(const std::string& args, const std::string& workdir) {
    std::string out_file = workdir + "/cli_stdout.txt";
    std::string cmd = std::string(NUDGEKIT_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.stdout_text = ss.str();
    return r;
}

std::string scratch_dir() {
    static int counter = 0;
    std::string dir = "cli_scratch_" + std::to_string(counter++);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config parse -> serialize -> parse is the identity") {
    RunConfig a;
    a.seed = 123;
    a.merge_gap_min = 25.0;
    a.arms = "context_gated";
    std::string text = a.serialize();
    RunConfig b = RunConfig::parse_text(text);
    CHECK(b.serialize() == text);
    CHECK(b.seed == 123);
    CHECK(b.merge_gap_min == 25.0);
}

TEST_CASE("unknown config keys and sections are hard errors") {
    CHECK_THROWS_AS(RunConfig::parse_text("[sleep]\nwindow_minn = 10\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse_text("[slep]\nwindow_min = 10\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse_text("[sleep]\nwindow_min 10\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse_text("[sleep]\nwindow_min = ten\n"), ConfigError);
}

TEST_CASE("the default config dump carries every pinned constant") {
    std::string dump = RunConfig{}.serialize();
    CHECK(dump.find("window_min = 10") != std::string::npos);
    CHECK(dump.find("merge_gap_min = 30") != std::string::npos);
    CHECK(dump.find("place_radius_m = 100") != std::string::npos);
    CHECK(dump.find("poi_cluster_m = 10") != std::string::npos);
    CHECK(dump.find("jump_filter_m = 150") != std::string::npos);
    CHECK(dump.find("knn_k = 6") != std::string::npos);
    CHECK(dump.find("advice_lead_min = 30") != std::string::npos);
    CHECK(dump.find("bedtime_lead_min = 60") != std::string::npos);
    CHECK(dump.find("max_consecutive_rejections = 3") != std::string::npos);
}

TEST_CASE("print-config emits the dump and exits 0") {
    std::string dir = scratch_dir();
    CliResult r = run_cli("print-config", dir);
    CHECK(r.exit_code == 0);
    CHECK(r.stdout_text.find("merge_gap_min = 30") != std::string::npos);
}

TEST_CASE("unknown flags exit with the config error code") {
    std::string dir = scratch_dir();
    CliResult r = run_cli("ingest --no-such-flag", dir);
    CHECK(r.exit_code == 2);
}

TEST_CASE("detect-sleep without a trained model exits with the data error code") {
    std::string dir = scratch_dir();
    {
        std::ofstream records(dir + "/records.csv");
        records << "slot_start\n"; // content irrelevant; the model check fires first
    }
    CliResult r = run_cli("detect-sleep --records " + dir + "/records.csv --models " + dir +
                              "/models.json --out " + dir,
                          dir);
    CHECK(r.exit_code == 3);
    CHECK(r.stdout_text.find("train-sleep") != std::string::npos);
}

TEST_CASE("ingest, train, detect and correlate run end to end on a synthetic trace") {
    std::string dir = scratch_dir();

    // synthesize a small trace + labeled corpus with the library
    sim::GridWorld world;
    sim::SubjectProfile profile;
    profile.subject_id = "s0";
    profile.seed = 99;
    {
        EventLog log = sim::synth_trace(world, profile, 19786, 10);
        std::ofstream trace(dir + "/trace.jsonl");
        for (const Event& e : log.events) trace << event_to_jsonl(e) << '\n';
    }
    {
        auto corpus = sim::build_sleep_corpus(world, profile, 19786, 10);
        fs::create_directories(dir + "/corpus");
        for (const auto& day : corpus) {
            ml::Dataset ds;
            ds.feature_names.assign(sleep::window_feature_names().begin(),
                                    sleep::window_feature_names().end());
            for (const auto& w : day.windows) ds.rows.push_back(window_to_row(w, "s0"));
            std::ofstream f(dir + "/corpus/day_" + format_date(day.day) + ".csv");
            ml::write_dataset_csv(f, ds);
        }
    }

    CliResult ingest = run_cli("ingest --in " + dir + "/trace.jsonl --out " + dir, dir);
    CHECK(ingest.exit_code == 0);
    CHECK(fs::exists(dir + "/records.csv"));

    CliResult train = run_cli("train-sleep --corpus " + dir + "/corpus --out " + dir, dir);
    CHECK(train.exit_code == 0);
    CHECK(fs::exists(dir + "/models.json"));

    CliResult detect = run_cli("detect-sleep --records " + dir + "/records.csv --models " + dir +
                                   "/models.json --out " + dir,
                               dir);
    CHECK(detect.exit_code == 0);
    std::string episodes = slurp(dir + "/episodes.jsonl");
    CHECK(episodes.find("bed_time") != std::string::npos);

    CliResult correlate = run_cli("correlate --records " + dir + "/records.csv --trace " + dir +
                                      "/trace.jsonl --episodes " + dir + "/episodes.jsonl --out " +
                                      dir,
                                  dir);
    CHECK(correlate.exit_code == 0);
    CHECK(fs::exists(dir + "/matrix.csv"));
    CHECK(fs::exists(dir + "/best_profile.json"));

    CliResult mine = run_cli("mine-routes --trace " + dir + "/trace.jsonl --out " + dir, dir);
    CHECK(mine.exit_code == 0);
    CHECK(fs::exists(dir + "/patterns.json"));
}

TEST_CASE("simulate is byte-deterministic for a fixed seed and emits the figure tables") {
    std::string dir = scratch_dir();
    {
        std::ofstream cfg(dir + "/demo.cfg");
        cfg << "[subjects]\ncount = 2\ndays = 20\n[arms]\narms = context_gated\n";
    }
    CliResult a = run_cli("simulate --config " + dir + "/demo.cfg --seed 7 --out " + dir + "/a",
                          dir);
    REQUIRE(a.exit_code == 0);
    CliResult b = run_cli("simulate --config " + dir + "/demo.cfg --seed 7 --out " + dir + "/b",
                          dir);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(dir + "/a/report.json") == slurp(dir + "/b/report.json"));
    CHECK(fs::exists(dir + "/a/fig13_funnel.csv"));
    CHECK(fs::exists(dir + "/a/fig15_steps.csv"));
    CHECK(fs::exists(dir + "/a/fig16_acceptance.csv"));
    CHECK(fs::exists(dir + "/a/fig18_bedding.csv"));

    CliResult missing_seed = run_cli("simulate --config " + dir + "/demo.cfg --out " + dir, dir);
    CHECK(missing_seed.exit_code == 2);

    CliResult fig = run_cli("report --run " + dir + "/a --figure fig13", dir);
    CHECK(fig.exit_code == 0);
    std::string funnel = slurp(dir + "/a/fig13_funnel.csv");
    CHECK(funnel.find("context_gated") != std::string::npos);
}

TEST_CASE("gzip traces are accepted by extension") {
    std::string dir = scratch_dir();
    sim::GridWorld world;
    sim::SubjectProfile profile;
    profile.seed = 7;
    EventLog log = sim::synth_trace(world, profile, 19786, 1);
    {
        std::ofstream trace(dir + "/t.jsonl");
        for (const Event& e : log.events) trace << event_to_jsonl(e) << '\n';
    }
    REQUIRE(std::system(("gzip -f " + dir + "/t.jsonl").c_str()) == 0);
    CliResult r = run_cli("ingest --in " + dir + "/t.jsonl.gz --out " + dir, dir);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir + "/records.csv"));
}

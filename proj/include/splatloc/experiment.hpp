#pragma once

#include "splatloc/image.hpp"
#include "splatloc/metrics.hpp"
#include "splatloc/pose.hpp"
#include "splatloc/renderer.hpp"
#include "splatloc/scene.hpp"
#include "splatloc/search.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace splatloc {

struct NoiseSpec {
    double q_scale = 0.0;
    double t_scale = 0.0;
    std::vector<std::uint64_t> seeds;
};

// One batch run: scene x camera x (query, seed) grid. Exactly one scene
// source and exactly one initial-pose source must be set.
struct ExperimentConfig {
    std::optional<std::string> scene_ply;
    std::optional<std::string> scene_json;
    std::optional<SyntheticSpec> scene_synthetic;

    Camera camera;

    std::vector<NamedPose> gt_poses;
    bool render_from_gt = true;  // self-query: queries rendered at GT poses
    std::map<std::string, std::string> query_images;  // name -> PNG path

    std::optional<std::string> initial_pose_file;
    std::optional<NoiseSpec> noise;

    StepSchedule schedule = StepSchedule::defaults();
    HeuristicKind heuristic = HeuristicKind::sad;
    SearchOptions options;

    double within_t_limit = 0.01;  // aggregate "ratio within" limits
    double within_r_limit = 1.0;   // degrees
    bool metric_units = false;     // scene units are meters; print cm in summaries

    std::string output_dir;  // empty: no files written
    bool emit_images = false;
    int threads = 0;  // 0: SPLATLOC_THREADS env var, then hardware concurrency

    void validate() const;
};

struct ReportRow {
    std::string name;
    std::uint64_t seed = 0;
    PoseError init_error;
    PoseError refined_error;
    int expansions = 0;
    Termination terminated_by = Termination::budget;
};

struct ReportAggregates {
    PoseError median_init;
    PoseError median_refined;
    double improvement_t_pct = 0.0;  // 100 * (1 - refined/init) on medians
    double improvement_r_pct = 0.0;
    double ratio_within_pct = 0.0;
    double within_t_limit = 0.0;
    double within_r_limit = 0.0;
};

struct Report {
    std::vector<ReportRow> rows;  // sorted by (name, seed)
    ReportAggregates aggregates;
};

// Percentage of rows whose refined error is within both limits.
double ratio_within(const std::vector<ReportRow>& rows, double t_limit, double r_limit);

ReportAggregates aggregate_rows(const std::vector<ReportRow>& rows, double t_limit,
                                double r_limit);

// Runs every query x seed, writes report.json/report.csv (and comparison
// PNGs when emit_images) under output_dir when set. Deterministic for a
// fixed config.
Report run_experiment(const ExperimentConfig& config);

// Diagonal split composite: rendered image below the main diagonal, query
// above it, a 1-pixel white diagonal between.
ImageBuffer render_comparison(const ImageBuffer& query, const ImageBuffer& rendered);

ExperimentConfig load_experiment_config(const std::string& path);

void write_report_json(const std::string& path, const Report& report);
void write_report_csv(const std::string& path, const Report& report);

// Worker count resolution: explicit value, else SPLATLOC_THREADS, else
// hardware concurrency.
int resolve_threads(int configured);

}  // namespace splatloc

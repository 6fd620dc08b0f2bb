#include "splatloc/experiment.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace splatloc;

namespace {

ExperimentConfig small_config(double q_noise, double t_noise, std::vector<std::uint64_t> seeds) {
    ExperimentConfig config;
    SyntheticSpec spec;
    spec.count = 60;
    spec.extent = 1.0;
    spec.seed = 17;
    config.scene_synthetic = spec;

    config.camera.fx = config.camera.fy = 32.0;
    config.camera.cx = config.camera.cy = 15.5;
    config.camera.width = config.camera.height = 32;
    config.camera.near = 0.05;

    NamedPose gt;
    gt.name = "q0";
    gt.pose.t = {0.0, 0.0, 2.2};
    config.gt_poses.push_back(gt);

    NoiseSpec noise;
    noise.q_scale = q_noise;
    noise.t_scale = t_noise;
    noise.seeds = std::move(seeds);
    config.noise = noise;

    config.schedule = StepSchedule{{{4e-3, 4e-2, 30}, {1e-3, 1e-2, 20}}};
    config.threads = 2;
    return config;
}

}  // namespace

TEST_SUITE_BEGIN("experiment");

TEST_CASE("ratio_within percentages") {
    auto row = [](double t, double r) {
        ReportRow row;
        row.refined_error = {t, r};
        return row;
    };
    std::vector<ReportRow> all_zero{row(0, 0), row(0, 0)};
    CHECK(ratio_within(all_zero, 0.01, 1.0) == 100.0);
    std::vector<ReportRow> all_above{row(1, 5), row(2, 3)};
    CHECK(ratio_within(all_above, 0.01, 1.0) == 0.0);
    std::vector<ReportRow> three_of_four{row(0.005, 0.5), row(0.002, 0.1), row(0.009, 0.99),
                                         row(0.5, 0.5)};
    CHECK(ratio_within(three_of_four, 0.01, 1.0) == 75.0);
    // Both limits must hold.
    std::vector<ReportRow> split{row(0.005, 5.0)};
    CHECK(ratio_within(split, 0.01, 1.0) == 0.0);
}

TEST_CASE("render_comparison splits along the diagonal") {
    const int n = 24;
    ImageBuffer query(n, n, 0.0);
    ImageBuffer rendered(n, n, 0.0);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            query.at(r, c, 0) = 1.0;     // query is red
            rendered.at(r, c, 2) = 1.0;  // rendered is blue
        }
    }
    const ImageBuffer cmp = render_comparison(query, rendered);
    CHECK(cmp.width == n);
    CHECK(cmp.height == n);
    // Top-right corner comes from the query, bottom-left from the render.
    CHECK(cmp.at(0, n - 1, 0) == 1.0);
    CHECK(cmp.at(0, n - 1, 2) == 0.0);
    CHECK(cmp.at(n - 1, 0, 2) == 1.0);
    CHECK(cmp.at(n - 1, 0, 0) == 0.0);
    // Diagonal is white.
    for (int r = 0; r < n; ++r) {
        CHECK(cmp.at(r, r, 0) == 1.0);
        CHECK(cmp.at(r, r, 1) == 1.0);
        CHECK(cmp.at(r, r, 2) == 1.0);
    }

    // Identical inputs: composite equals the input except on the diagonal.
    const ImageBuffer same = render_comparison(query, query);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            if (c != r) {
                CHECK(same.at(r, c, 0) == query.at(r, c, 0));
                CHECK(same.at(r, c, 1) == query.at(r, c, 1));
            }
        }
    }

    const ImageBuffer other(n, n - 1);
    CHECK_THROWS_AS(render_comparison(query, other), std::invalid_argument);
}

TEST_CASE("zero-noise experiment refines to exactly the ground truth") {
    const ExperimentConfig config = small_config(0.0, 0.0, {1, 2});
    const Report report = run_experiment(config);
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) {
        CHECK(row.init_error.translation == 0.0);
        CHECK(row.init_error.rotation == 0.0);
        CHECK(row.refined_error.translation == 0.0);
        CHECK(row.refined_error.rotation == 0.0);
        CHECK(row.terminated_by == Termination::h_threshold);
        CHECK(row.expansions == 0);
    }
    CHECK(report.aggregates.median_refined.translation == 0.0);
    CHECK(report.aggregates.improvement_t_pct == 0.0);
    CHECK(report.aggregates.improvement_r_pct == 0.0);
    CHECK(report.aggregates.ratio_within_pct == 100.0);
}

TEST_CASE("aggregates equal an independent recomputation from rows") {
    const ExperimentConfig config = small_config(5e-3, 5e-2, {1, 2, 3});
    const Report report = run_experiment(config);
    REQUIRE(report.rows.size() == 3);

    auto median_of = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[(v.size() - 1) / 2];
    };
    std::vector<double> it, ir, rt, rr;
    std::size_t within = 0;
    for (const auto& row : report.rows) {
        it.push_back(row.init_error.translation);
        ir.push_back(row.init_error.rotation);
        rt.push_back(row.refined_error.translation);
        rr.push_back(row.refined_error.rotation);
        if (row.refined_error.translation <= config.within_t_limit &&
            row.refined_error.rotation <= config.within_r_limit) {
            ++within;
        }
    }
    const auto& agg = report.aggregates;
    CHECK(agg.median_init.translation == median_of(it));
    CHECK(agg.median_init.rotation == median_of(ir));
    CHECK(agg.median_refined.translation == median_of(rt));
    CHECK(agg.median_refined.rotation == median_of(rr));
    CHECK(agg.improvement_t_pct ==
          doctest::Approx(100.0 * (1.0 - agg.median_refined.translation /
                                             agg.median_init.translation)));
    CHECK(agg.ratio_within_pct ==
          doctest::Approx(100.0 * static_cast<double>(within) / report.rows.size()));
}

TEST_CASE("experiments are reproducible and rows sorted") {
    ExperimentConfig config = small_config(5e-3, 5e-2, {3, 1, 2});
    NamedPose second;
    second.name = "a_query";
    second.pose.t = {0.05, -0.05, 2.1};
    config.gt_poses.push_back(second);

    const Report a = run_experiment(config);
    const Report b = run_experiment(config);
    REQUIRE(a.rows.size() == 6);
    REQUIRE(b.rows.size() == 6);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].name == b.rows[i].name);
        CHECK(a.rows[i].seed == b.rows[i].seed);
        CHECK(a.rows[i].init_error.translation == b.rows[i].init_error.translation);
        CHECK(a.rows[i].refined_error.translation == b.rows[i].refined_error.translation);
        CHECK(a.rows[i].refined_error.rotation == b.rows[i].refined_error.rotation);
        CHECK(a.rows[i].expansions == b.rows[i].expansions);
    }
    // Sorted by (name, seed); "a_query" < "q0".
    CHECK(a.rows[0].name == "a_query");
    CHECK(a.rows[0].seed == 1);
    CHECK(a.rows[2].seed == 3);
    CHECK(a.rows[3].name == "q0");
}

TEST_CASE("noise grid reproduces the three-row study shape") {
    const std::vector<std::pair<double, double>> grid{{1e-2, 1e-1}, {1e-2, 1e-2}, {1e-3, 1e-3}};
    std::vector<ReportAggregates> aggregates;
    for (const auto& [q, t] : grid) {
        const Report report = run_experiment(small_config(q, t, {1, 2}));
        aggregates.push_back(report.aggregates);
    }
    REQUIRE(aggregates.size() == 3);
    // Larger translation noise produces larger initial medians.
    CHECK(aggregates[0].median_init.translation > aggregates[1].median_init.translation);
    CHECK(aggregates[1].median_init.translation > aggregates[2].median_init.translation);
}

TEST_CASE("report files: JSON, CSV, and comparison images") {
    namespace fs = std::filesystem;
    ExperimentConfig config = small_config(5e-3, 5e-2, {1});
    config.output_dir = "test_report_out";
    config.emit_images = true;
    const Report report = run_experiment(config);

    REQUIRE(fs::exists("test_report_out/report.json"));
    REQUIRE(fs::exists("test_report_out/report.csv"));
    CHECK(fs::exists("test_report_out/q0_1_init.png"));
    CHECK(fs::exists("test_report_out/q0_1_refined.png"));

    std::ifstream csv("test_report_out/report.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "name,seed,init_t,init_r,refined_t,refined_r,expansions,terminated_by");
    int data_lines = 0;
    std::string line;
    while (std::getline(csv, line)) {
        if (!line.empty()) {
            ++data_lines;
        }
    }
    CHECK(data_lines == static_cast<int>(report.rows.size()));

    std::ifstream json_in("test_report_out/report.json");
    std::string json_text((std::istreambuf_iterator<char>(json_in)),
                          std::istreambuf_iterator<char>());
    CHECK(json_text.find("\"expansions\"") != std::string::npos);
    CHECK(json_text.find("\"median_refined\"") != std::string::npos);
    fs::remove_all("test_report_out");
}

TEST_CASE("config validation") {
    ExperimentConfig config = small_config(1e-3, 1e-2, {1});
    CHECK_NOTHROW(config.validate());

    SUBCASE("two scene sources") {
        config.scene_ply = "also.ply";
        CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    }
    SUBCASE("no initial source") {
        config.noise.reset();
        CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    }
    SUBCASE("empty seeds") {
        config.noise->seeds.clear();
        CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    }
    SUBCASE("missing query image in file mode") {
        config.render_from_gt = false;
        CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    }
}

TEST_CASE("config JSON loads every section") {
    const std::string path = "test_config.json";
    {
        std::ofstream out(path);
        out << R"({
  "scene": {"synthetic": {"count": 40, "extent": 1.0, "scale_range": [0.01, 0.05],
                          "opacity_range": [0.2, 0.9], "seed": 5}},
  "camera": {"fx": 32, "fy": 32, "cx": 15.5, "cy": 15.5, "width": 32, "height": 32, "near": 0.05},
  "queries": {"render_from_gt": true,
              "poses": [{"name": "v0", "q": [1, 0, 0, 0], "t": [0, 0, 2.2]}]},
  "initial": {"noise": {"q_scale": 0.001, "t_scale": 0.01, "seeds": [4, 5]}},
  "schedule": [{"dq": 0.004, "dt": 0.04, "budget": 25}, {"dq": 0.001, "dt": 0.01, "budget": 10}],
  "heuristic": "psnr",
  "options": {"g_weight": 0.5, "stagnation_limit": 12, "decimation": 2},
  "within_limits": [0.02, 2.0],
  "metric": true,
  "emit_images": false,
  "threads": 2
})";
    }
    const ExperimentConfig config = load_experiment_config(path);
    CHECK(config.scene_synthetic.has_value());
    CHECK(config.scene_synthetic->count == 40);
    CHECK(config.camera.width == 32);
    REQUIRE(config.gt_poses.size() == 1);
    CHECK(config.gt_poses[0].name == "v0");
    CHECK(config.gt_poses[0].pose.t.z() == doctest::Approx(2.2));
    REQUIRE(config.noise.has_value());
    CHECK(config.noise->seeds.size() == 2);
    CHECK(config.schedule.levels.size() == 2);
    CHECK(config.heuristic == HeuristicKind::psnr);
    CHECK(config.options.g_weight == 0.5);
    CHECK(config.options.stagnation_limit == 12);
    CHECK(config.options.decimation == 2);
    CHECK(config.within_t_limit == 0.02);
    CHECK(config.metric_units);
    CHECK(config.threads == 2);
    std::remove(path.c_str());

    // A run driven entirely by the loaded config works end to end.
    ExperimentConfig runnable = config;
    runnable.heuristic = HeuristicKind::sad;
    runnable.options.decimation = 1;
    runnable.options.g_weight = 0.0;
    const Report report = run_experiment(runnable);
    CHECK(report.rows.size() == 2);
}

TEST_CASE("decimated search still refines coarse noise") {
    ExperimentConfig config = small_config(1e-2, 1e-1, {6});
    config.camera.fx = config.camera.fy = 64.0;
    config.camera.cx = config.camera.cy = 31.5;
    config.camera.width = config.camera.height = 64;
    config.schedule = StepSchedule{{{8e-3, 8e-2, 40}, {2e-3, 2e-2, 25}}};
    config.options.decimation = 2;
    const Report report = run_experiment(config);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].refined_error.translation < report.rows[0].init_error.translation);
}

TEST_SUITE_END();

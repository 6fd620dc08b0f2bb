#include "splatloc/experiment.hpp"
#include "splatloc/image.hpp"
#include "splatloc/metrics.hpp"
#include "splatloc/pose.hpp"
#include "splatloc/renderer.hpp"
#include "splatloc/scene.hpp"
#include "splatloc/search.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace splatloc;

struct SceneArgs {
    std::string path;
    int synthetic_count = 0;
    double synthetic_extent = 1.0;
    std::uint64_t synthetic_seed = 0;

    void add_to(CLI::App& app) {
        app.add_option("--scene", path, "scene file (.ply or .json)");
        app.add_option("--synthetic", synthetic_count, "generate a synthetic scene with N primitives");
        app.add_option("--synthetic-extent", synthetic_extent, "synthetic scene extent");
        app.add_option("--synthetic-seed", synthetic_seed, "synthetic scene seed");
    }

    Scene load() const {
        if (synthetic_count > 0) {
            SyntheticSpec spec;
            spec.count = synthetic_count;
            spec.extent = synthetic_extent;
            spec.seed = synthetic_seed;
            return generate_synthetic(spec);
        }
        if (path.empty()) {
            throw CLI::ValidationError("--scene or --synthetic is required");
        }
        if (path.size() >= 4 && path.substr(path.size() - 4) == ".ply") {
            return load_ply(path);
        }
        return load_scene_json(path);
    }
};

struct CameraArgs {
    Camera cam{128.0, 128.0, 63.5, 63.5, 128, 128, 0.01};
    bool fx_set = false, fy_set = false, cx_set = false, cy_set = false;

    void add_to(CLI::App& app) {
        app.add_option("--width", cam.width, "image width [128]");
        app.add_option("--height", cam.height, "image height [128]");
        app.add_option("--fx", cam.fx, "focal length x [width]")->each([this](const std::string&) { fx_set = true; });
        app.add_option("--fy", cam.fy, "focal length y [fx]")->each([this](const std::string&) { fy_set = true; });
        app.add_option("--cx", cam.cx, "principal point x [(width-1)/2]")->each([this](const std::string&) { cx_set = true; });
        app.add_option("--cy", cam.cy, "principal point y [(height-1)/2]")->each([this](const std::string&) { cy_set = true; });
        app.add_option("--near", cam.near, "near plane [0.01]");
    }

    Camera resolve() const {
        Camera c = cam;
        if (!fx_set) {
            c.fx = c.width;
        }
        if (!fy_set) {
            c.fy = c.fx;
        }
        if (!cx_set) {
            c.cx = (c.width - 1) / 2.0;
        }
        if (!cy_set) {
            c.cy = (c.height - 1) / 2.0;
        }
        c.validate();
        return c;
    }
};

Pose parse_pose(const std::string& text) {
    std::istringstream ss(text);
    double w, x, y, z, tx, ty, tz;
    if (!(ss >> w >> x >> y >> z >> tx >> ty >> tz)) {
        throw CLI::ValidationError("pose must be \"qw qx qy qz tx ty tz\"");
    }
    Pose p;
    p.q = Eigen::Quaterniond(w, x, y, z);
    p.t = {tx, ty, tz};
    return normalized(p);
}

StepSchedule parse_schedule(const std::string& text) {
    if (text.empty()) {
        return StepSchedule::defaults();
    }
    StepSchedule schedule;
    std::istringstream ss(text);
    std::string level;
    while (std::getline(ss, level, ';')) {
        StepLevel lv;
        char comma;
        std::istringstream ls(level);
        if (!(ls >> lv.dq >> comma >> lv.dt >> comma >> lv.budget)) {
            throw CLI::ValidationError("schedule level must be \"dq,dt,budget\"");
        }
        schedule.levels.push_back(lv);
    }
    schedule.validate();
    return schedule;
}

std::string format_error(const PoseError& e, bool metric) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(metric ? 3 : 5);
    if (metric) {
        ss << e.translation * 100.0 << "cm/" << std::setprecision(3) << e.rotation << "\xc2\xb0";
    } else {
        ss << e.translation << "/" << std::setprecision(4) << e.rotation << "\xc2\xb0";
    }
    return ss.str();
}

void print_result(const RefinementResult& res) {
    const Pose& p = res.best_pose;
    std::cout << "best pose: " << p.q.w() << ' ' << p.q.x() << ' ' << p.q.y() << ' ' << p.q.z()
              << ' ' << p.t.x() << ' ' << p.t.y() << ' ' << p.t.z() << '\n';
    std::cout << "best h: " << res.best_h << "\nexpansions: " << res.expansions
              << "\nrenders: " << res.renders << "\nterminated by: " << to_string(res.terminated_by)
              << '\n';
    for (const auto& lv : res.per_level_stats) {
        std::cout << "  level " << lv.level << ": expansions " << lv.expansions << ", best h "
                  << lv.best_h << ", ended by " << to_string(lv.terminated_by) << '\n';
    }
    std::cout << "eq6 consistency violation rate: " << consistency_violation_rate(res) << '\n';
}

int run_render(const SceneArgs& scene_args, const CameraArgs& cam_args, const std::string& pose_text,
               const std::string& pose_file, const std::string& pose_name, const std::string& out,
               const std::string& opacity, int threads) {
    const Scene scene = scene_args.load();
    const Camera cam = cam_args.resolve();
    Pose pose;
    if (!pose_file.empty()) {
        const auto poses = load_pose_file(pose_file);
        const auto it = std::find_if(poses.begin(), poses.end(),
                                     [&](const NamedPose& np) { return np.name == pose_name; });
        if (it == poses.end()) {
            std::cerr << "pose '" << pose_name << "' not found in " << pose_file << '\n';
            return 1;
        }
        pose = it->pose;
    } else {
        pose = parse_pose(pose_text);
    }
    RenderOptions opts;
    opts.opacity_mode = opacity == "eq4" ? OpacityMode::eq4 : OpacityMode::direct;
    opts.threads = resolve_threads(threads);
    save_png(out, render(scene, cam, pose, opts));
    std::cout << "wrote " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pose refinement by render-and-compare over 3D Gaussian scenes"};
    app.require_subcommand(1);
    std::cout.precision(12);

    // render
    auto* render_cmd = app.add_subcommand("render", "render a scene from a pose to a PNG");
    SceneArgs render_scene;
    CameraArgs render_cam;
    std::string render_pose, render_pose_file, render_pose_name, render_out = "render.png";
    std::string render_opacity = "direct";
    int render_threads = 0;
    render_scene.add_to(*render_cmd);
    render_cam.add_to(*render_cmd);
    render_cmd->add_option("--pose", render_pose, "pose \"qw qx qy qz tx ty tz\"");
    render_cmd->add_option("--pose-file", render_pose_file, "pose text file");
    render_cmd->add_option("--name", render_pose_name, "pose name inside --pose-file");
    render_cmd->add_option("--out", render_out, "output PNG path");
    render_cmd->add_option("--opacity-mode", render_opacity, "direct|eq4")
        ->check(CLI::IsMember({"direct", "eq4"}));
    render_cmd->add_option("--threads", render_threads, "render threads (0 = auto)");

    // refine
    auto* refine_cmd = app.add_subcommand("refine", "refine a single pose against a query image");
    SceneArgs refine_scene;
    CameraArgs refine_cam;
    std::string refine_query, refine_gt, refine_initial, refine_schedule, refine_heuristic = "sad";
    std::string refine_trace, refine_out_pose;
    double refine_noise_q = -1.0, refine_noise_t = -1.0;
    std::uint64_t refine_seed = 0;
    double refine_g_weight = 0.0, refine_h_threshold = -1.0;
    int refine_stagnation = 50, refine_decimation = 1;
    bool refine_metric = false;
    refine_scene.add_to(*refine_cmd);
    refine_cam.add_to(*refine_cmd);
    refine_cmd->add_option("--query", refine_query, "query PNG (omit with --gt for self-query)");
    refine_cmd->add_option("--gt", refine_gt, "ground-truth pose, enables self-query and error report");
    refine_cmd->add_option("--initial", refine_initial, "initial pose \"qw qx qy qz tx ty tz\"");
    refine_cmd->add_option("--noise-q", refine_noise_q, "derive initial pose: quaternion noise scale");
    refine_cmd->add_option("--noise-t", refine_noise_t, "derive initial pose: translation noise scale");
    refine_cmd->add_option("--seed", refine_seed, "noise seed");
    refine_cmd->add_option("--schedule", refine_schedule, "\"dq,dt,budget;...\" (default 3-level)");
    refine_cmd->add_option("--heuristic", refine_heuristic, "sad|psnr|ssim")
        ->check(CLI::IsMember({"sad", "psnr", "ssim"}));
    refine_cmd->add_option("--g-weight", refine_g_weight, "lambda in f = lambda*g + h [0]");
    refine_cmd->add_option("--h-threshold", refine_h_threshold, "destination threshold (default: auto)");
    refine_cmd->add_option("--stagnation", refine_stagnation, "stagnation limit [50]");
    refine_cmd->add_option("--decimation", refine_decimation, "search-time resolution divisor [1]");
    refine_cmd->add_option("--trace", refine_trace, "write expansion trace JSONL here");
    refine_cmd->add_option("--out-pose", refine_out_pose, "write refined pose file here");
    refine_cmd->add_flag("--metric", refine_metric, "print translation errors in cm");

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "run a config-driven batch experiment");
    std::string exp_config, exp_output;
    exp_cmd->add_option("--config", exp_config, "experiment config JSON")->required();
    exp_cmd->add_option("--output", exp_output, "override the config output directory");

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "pose error table between two pose files");
    std::string cmp_est, cmp_gt;
    bool cmp_metric = false;
    cmp_cmd->add_option("--est", cmp_est, "estimated poses")->required();
    cmp_cmd->add_option("--gt", cmp_gt, "ground-truth poses")->required();
    cmp_cmd->add_flag("--metric", cmp_metric, "print translation errors in cm");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(render_cmd)) {
            return run_render(render_scene, render_cam, render_pose, render_pose_file,
                              render_pose_name, render_out, render_opacity, render_threads);
        }

        if (app.got_subcommand(refine_cmd)) {
            const Scene scene = refine_scene.load();
            const Camera cam = refine_cam.resolve();

            std::optional<Pose> gt;
            if (!refine_gt.empty()) {
                gt = parse_pose(refine_gt);
            }
            ImageBuffer query;
            if (!refine_query.empty()) {
                query = load_png(refine_query);
            } else if (gt) {
                query = render(scene, cam, *gt);
            } else {
                throw CLI::ValidationError("need --query or --gt");
            }

            Pose initial;
            if (!refine_initial.empty()) {
                initial = parse_pose(refine_initial);
            } else if (gt && refine_noise_q >= 0.0 && refine_noise_t >= 0.0) {
                initial = inject_noise(*gt, refine_noise_q, refine_noise_t, refine_seed);
            } else {
                throw CLI::ValidationError("need --initial or --gt with --noise-q/--noise-t");
            }

            SearchOptions opts;
            opts.g_weight = refine_g_weight;
            if (refine_h_threshold >= 0.0) {
                opts.h_threshold = refine_h_threshold;
            }
            opts.stagnation_limit = refine_stagnation;
            opts.decimation = refine_decimation;

            const RefinementResult res =
                refine(scene, cam, query, initial, parse_schedule(refine_schedule),
                       heuristic_kind_from_string(refine_heuristic), opts);
            print_result(res);
            if (gt) {
                std::cout << "initial error: " << format_error(pose_error(initial, *gt), refine_metric)
                          << '\n';
                std::cout << "refined error: "
                          << format_error(pose_error(res.best_pose, *gt), refine_metric) << '\n';
            }
            if (!refine_trace.empty()) {
                write_trace_jsonl(refine_trace, res);
                std::cout << "wrote " << refine_trace << '\n';
            }
            if (!refine_out_pose.empty()) {
                save_pose_file(refine_out_pose, {{"refined", res.best_pose}});
                std::cout << "wrote " << refine_out_pose << '\n';
            }
            return 0;
        }

        if (app.got_subcommand(exp_cmd)) {
            ExperimentConfig config = load_experiment_config(exp_config);
            if (!exp_output.empty()) {
                config.output_dir = exp_output;
            }
            const Report report = run_experiment(config);
            const auto& a = report.aggregates;
            std::cout << report.rows.size() << " rows\n";
            std::cout << "median init error:    " << format_error(a.median_init, config.metric_units)
                      << '\n';
            std::cout << "median refined error: "
                      << format_error(a.median_refined, config.metric_units) << '\n';
            std::cout << "improvement: t " << a.improvement_t_pct << "%, r " << a.improvement_r_pct
                      << "%\n";
            std::cout << "within (" << a.within_t_limit << ", " << a.within_r_limit
                      << "\xc2\xb0): " << a.ratio_within_pct << "%\n";
            if (!config.output_dir.empty()) {
                std::cout << "report written to " << config.output_dir << '\n';
            }
            return 0;
        }

        if (app.got_subcommand(cmp_cmd)) {
            const auto est = load_pose_file(cmp_est);
            const auto gts = load_pose_file(cmp_gt);
            std::map<std::string, Pose> gt_by_name;
            for (const auto& np : gts) {
                gt_by_name[np.name] = np.pose;
            }
            std::vector<std::pair<Pose, Pose>> pairs;
            std::cout << std::left << std::setw(24) << "name" << "error (t/r)\n";
            for (const auto& np : est) {
                const auto it = gt_by_name.find(np.name);
                if (it == gt_by_name.end()) {
                    std::cerr << "no ground truth for '" << np.name << "', skipping\n";
                    continue;
                }
                pairs.emplace_back(np.pose, it->second);
                std::cout << std::left << std::setw(24) << np.name
                          << format_error(pose_error(np.pose, it->second), cmp_metric) << '\n';
            }
            if (pairs.empty()) {
                std::cerr << "no matching poses\n";
                return 1;
            }
            std::cout << std::left << std::setw(24) << "median"
                      << format_error(median_errors(pairs), cmp_metric) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#include "splatloc/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace splatloc {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
    const int scene_sources = (scene_ply ? 1 : 0) + (scene_json ? 1 : 0) + (scene_synthetic ? 1 : 0);
    if (scene_sources != 1) {
        throw std::invalid_argument("experiment config: exactly one scene source required");
    }
    const int init_sources = (initial_pose_file ? 1 : 0) + (noise ? 1 : 0);
    if (init_sources != 1) {
        throw std::invalid_argument("experiment config: exactly one initial-pose source required");
    }
    if (noise && noise->seeds.empty()) {
        throw std::invalid_argument("experiment config: noise spec needs at least one seed");
    }
    if (gt_poses.empty()) {
        throw std::invalid_argument("experiment config: no ground-truth poses");
    }
    if (!render_from_gt) {
        for (const auto& np : gt_poses) {
            if (query_images.find(np.name) == query_images.end()) {
                throw std::invalid_argument("experiment config: no query image for '" + np.name + "'");
            }
        }
    }
    camera.validate();
    schedule.validate();
}

int resolve_threads(int configured) {
    if (configured > 0) {
        return configured;
    }
    if (const char* env = std::getenv("SPLATLOC_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) {
            return n;
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

double ratio_within(const std::vector<ReportRow>& rows, double t_limit, double r_limit) {
    if (rows.empty()) {
        return 0.0;
    }
    std::size_t within = 0;
    for (const auto& row : rows) {
        if (row.refined_error.translation <= t_limit && row.refined_error.rotation <= r_limit) {
            ++within;
        }
    }
    return 100.0 * static_cast<double>(within) / static_cast<double>(rows.size());
}

namespace {

double lower_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

double improvement_pct(double init, double refined) {
    if (init <= 0.0) {
        return 0.0;
    }
    return 100.0 * (1.0 - refined / init);
}

}  // namespace

ReportAggregates aggregate_rows(const std::vector<ReportRow>& rows, double t_limit,
                                double r_limit) {
    if (rows.empty()) {
        throw std::invalid_argument("aggregate_rows: no rows");
    }
    std::vector<double> it, ir, rt, rr;
    for (const auto& row : rows) {
        it.push_back(row.init_error.translation);
        ir.push_back(row.init_error.rotation);
        rt.push_back(row.refined_error.translation);
        rr.push_back(row.refined_error.rotation);
    }
    ReportAggregates agg;
    agg.median_init = {lower_median(std::move(it)), lower_median(std::move(ir))};
    agg.median_refined = {lower_median(std::move(rt)), lower_median(std::move(rr))};
    agg.improvement_t_pct = improvement_pct(agg.median_init.translation, agg.median_refined.translation);
    agg.improvement_r_pct = improvement_pct(agg.median_init.rotation, agg.median_refined.rotation);
    agg.ratio_within_pct = ratio_within(rows, t_limit, r_limit);
    agg.within_t_limit = t_limit;
    agg.within_r_limit = r_limit;
    return agg;
}

ImageBuffer render_comparison(const ImageBuffer& query, const ImageBuffer& rendered) {
    if (!query.same_size(rendered)) {
        throw std::invalid_argument("render_comparison: image dimensions differ");
    }
    ImageBuffer out(query.width, query.height);
    const int h = query.height, w = query.width;
    for (int r = 0; r < h; ++r) {
        const int diag =
            h > 1 ? static_cast<int>(std::lround(static_cast<double>(r) * (w - 1) / (h - 1))) : 0;
        for (int c = 0; c < w; ++c) {
            if (c == diag) {
                out.set_pixel(r, c, {1.0, 1.0, 1.0});
            } else if (c > diag) {
                out.set_pixel(r, c, query.pixel(r, c));
            } else {
                out.set_pixel(r, c, rendered.pixel(r, c));
            }
        }
    }
    return out;
}

namespace {

Scene load_scene(const ExperimentConfig& config) {
    if (config.scene_ply) {
        return load_ply(*config.scene_ply);
    }
    if (config.scene_json) {
        return load_scene_json(*config.scene_json);
    }
    return generate_synthetic(*config.scene_synthetic);
}

struct Task {
    const NamedPose* gt = nullptr;
    std::uint64_t seed = 0;
    Pose initial;
};

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
}

}  // namespace

Report run_experiment(const ExperimentConfig& config) {
    config.validate();
    const Scene scene = load_scene(config);

    std::map<std::string, Pose> initial_by_name;
    if (config.initial_pose_file) {
        for (const auto& np : load_pose_file(*config.initial_pose_file)) {
            initial_by_name[np.name] = np.pose;
        }
    }

    std::vector<Task> tasks;
    for (const auto& gt : config.gt_poses) {
        if (config.noise) {
            for (std::uint64_t seed : config.noise->seeds) {
                Task t;
                t.gt = &gt;
                t.seed = seed;
                t.initial = inject_noise(gt.pose, config.noise->q_scale, config.noise->t_scale, seed);
                tasks.push_back(t);
            }
        } else {
            const auto it = initial_by_name.find(gt.name);
            if (it == initial_by_name.end()) {
                throw std::runtime_error("no initial pose for query '" + gt.name + "' in " +
                                         *config.initial_pose_file);
            }
            tasks.push_back({&gt, 0, it->second});
        }
    }

    if (!config.output_dir.empty()) {
        fs::create_directories(config.output_dir);
    }

    Report report;
    report.rows.resize(tasks.size());
    const int threads = resolve_threads(config.threads);

    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        if (failed.load()) {
            return;
        }
        try {
            const Task& task = tasks[i];
            RenderOptions render_opts;
            render_opts.opacity_mode = config.options.opacity_mode;

            ImageBuffer query;
            if (config.render_from_gt) {
                query = render(scene, config.camera, task.gt->pose, render_opts);
            } else {
                query = load_png(config.query_images.at(task.gt->name));
                if (query.width != config.camera.width || query.height != config.camera.height) {
                    throw std::runtime_error("query image '" + task.gt->name +
                                             "' does not match the camera dimensions");
                }
            }

            const RefinementResult res = refine(scene, config.camera, query, task.initial,
                                                config.schedule, config.heuristic, config.options);

            ReportRow row;
            row.name = task.gt->name;
            row.seed = task.seed;
            row.init_error = pose_error(task.initial, task.gt->pose);
            row.refined_error = pose_error(res.best_pose, task.gt->pose);
            row.expansions = res.expansions;
            row.terminated_by = res.terminated_by;
            report.rows[i] = std::move(row);

            if (config.emit_images && !config.output_dir.empty()) {
                const std::string stem =
                    config.output_dir + "/" + task.gt->name + "_" + std::to_string(task.seed);
                const ImageBuffer init_render = render(scene, config.camera, task.initial, render_opts);
                const ImageBuffer refined_render =
                    render(scene, config.camera, res.best_pose, render_opts);
                save_png(stem + "_init.png", render_comparison(query, init_render));
                save_png(stem + "_refined.png", render_comparison(query, refined_render));
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            failed.store(true);
            failure = e.what();
        }
    });
    if (failed.load()) {
        throw std::runtime_error("experiment task failed: " + failure);
    }

    std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.name != b.name) {
            return a.name < b.name;
        }
        return a.seed < b.seed;
    });
    report.aggregates = aggregate_rows(report.rows, config.within_t_limit, config.within_r_limit);

    if (!config.output_dir.empty()) {
        write_report_json(config.output_dir + "/report.json", report);
        write_report_csv(config.output_dir + "/report.csv", report);
    }
    return report;
}

namespace {

json row_to_json(const ReportRow& row) {
    return json{{"name", row.name},
                {"seed", row.seed},
                {"init_error", {row.init_error.translation, row.init_error.rotation}},
                {"refined_error", {row.refined_error.translation, row.refined_error.rotation}},
                {"expansions", row.expansions},
                {"terminated_by", to_string(row.terminated_by)}};
}

}  // namespace

void write_report_json(const std::string& path, const Report& report) {
    json j;
    j["rows"] = json::array();
    for (const auto& row : report.rows) {
        j["rows"].push_back(row_to_json(row));
    }
    const auto& a = report.aggregates;
    j["aggregates"] = {
        {"median_init", {a.median_init.translation, a.median_init.rotation}},
        {"median_refined", {a.median_refined.translation, a.median_refined.rotation}},
        {"improvement_t_pct", a.improvement_t_pct},
        {"improvement_r_pct", a.improvement_r_pct},
        {"ratio_within_pct", a.ratio_within_pct},
        {"within_limits", {a.within_t_limit, a.within_r_limit}},
    };
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write report: " + path);
    }
    out << j.dump(2) << '\n';
}

void write_report_csv(const std::string& path, const Report& report) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write report: " + path);
    }
    out.precision(17);
    out << "name,seed,init_t,init_r,refined_t,refined_r,expansions,terminated_by\n";
    for (const auto& row : report.rows) {
        out << row.name << ',' << row.seed << ',' << row.init_error.translation << ','
            << row.init_error.rotation << ',' << row.refined_error.translation << ','
            << row.refined_error.rotation << ',' << row.expansions << ','
            << to_string(row.terminated_by) << '\n';
    }
}

namespace {

std::string resolve_path(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    if (path.is_absolute()) {
        return path.string();
    }
    return (base / path).string();
}

StepSchedule schedule_from_json(const json& j) {
    StepSchedule schedule;
    for (const auto& jl : j) {
        StepLevel lv;
        lv.dq = jl.at("dq").get<double>();
        lv.dt = jl.at("dt").get<double>();
        lv.budget = jl.at("budget").get<int>();
        schedule.levels.push_back(lv);
    }
    return schedule;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    const fs::path base = fs::path(path).parent_path();

    ExperimentConfig config;
    const json& js = j.at("scene");
    if (js.contains("ply")) {
        config.scene_ply = resolve_path(base, js.at("ply").get<std::string>());
    }
    if (js.contains("json")) {
        config.scene_json = resolve_path(base, js.at("json").get<std::string>());
    }
    if (js.contains("synthetic")) {
        const json& jsyn = js.at("synthetic");
        SyntheticSpec spec;
        spec.count = jsyn.value("count", spec.count);
        spec.extent = jsyn.value("extent", spec.extent);
        if (jsyn.contains("scale_range")) {
            spec.scale_range = {jsyn.at("scale_range")[0].get<double>(),
                                jsyn.at("scale_range")[1].get<double>()};
        }
        if (jsyn.contains("opacity_range")) {
            spec.opacity_range = {jsyn.at("opacity_range")[0].get<double>(),
                                  jsyn.at("opacity_range")[1].get<double>()};
        }
        spec.seed = jsyn.value("seed", spec.seed);
        config.scene_synthetic = spec;
    }

    const json& jc = j.at("camera");
    config.camera.fx = jc.at("fx").get<double>();
    config.camera.fy = jc.at("fy").get<double>();
    config.camera.cx = jc.at("cx").get<double>();
    config.camera.cy = jc.at("cy").get<double>();
    config.camera.width = jc.at("width").get<int>();
    config.camera.height = jc.at("height").get<int>();
    config.camera.near = jc.value("near", config.camera.near);

    const json& jq = j.at("queries");
    config.render_from_gt = jq.value("render_from_gt", true);
    if (jq.contains("gt_poses")) {
        config.gt_poses = load_pose_file(resolve_path(base, jq.at("gt_poses").get<std::string>()));
    } else if (jq.contains("poses")) {
        for (const auto& jp : jq.at("poses")) {
            NamedPose np;
            np.name = jp.at("name").get<std::string>();
            const auto& q = jp.at("q");
            const auto& t = jp.at("t");
            np.pose.q = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                           q[2].get<double>(), q[3].get<double>());
            np.pose.t = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
            np.pose = normalized(np.pose);
            config.gt_poses.push_back(std::move(np));
        }
    } else {
        throw std::runtime_error(path + ": queries must provide gt_poses or poses");
    }
    if (jq.contains("images")) {
        for (const auto& [name, img] : jq.at("images").items()) {
            config.query_images[name] = resolve_path(base, img.get<std::string>());
        }
    }

    const json& ji = j.at("initial");
    if (ji.contains("pose_file")) {
        config.initial_pose_file = resolve_path(base, ji.at("pose_file").get<std::string>());
    }
    if (ji.contains("noise")) {
        const json& jn = ji.at("noise");
        NoiseSpec noise;
        noise.q_scale = jn.at("q_scale").get<double>();
        noise.t_scale = jn.at("t_scale").get<double>();
        for (const auto& s : jn.at("seeds")) {
            noise.seeds.push_back(s.get<std::uint64_t>());
        }
        config.noise = noise;
    }

    if (j.contains("schedule")) {
        config.schedule = schedule_from_json(j.at("schedule"));
    }
    config.heuristic = heuristic_kind_from_string(j.value("heuristic", "sad"));

    if (j.contains("options")) {
        const json& jo = j.at("options");
        config.options.g_weight = jo.value("g_weight", config.options.g_weight);
        if (jo.contains("h_threshold") && !jo.at("h_threshold").is_null()) {
            config.options.h_threshold = jo.at("h_threshold").get<double>();
        }
        config.options.stagnation_limit = jo.value("stagnation_limit", config.options.stagnation_limit);
        config.options.decimation = jo.value("decimation", config.options.decimation);
        if (jo.value("opacity_mode", "direct") == std::string("eq4")) {
            config.options.opacity_mode = OpacityMode::eq4;
        }
    }

    if (j.contains("within_limits")) {
        config.within_t_limit = j.at("within_limits")[0].get<double>();
        config.within_r_limit = j.at("within_limits")[1].get<double>();
    }
    config.metric_units = j.value("metric", false);
    if (j.contains("output")) {
        config.output_dir = resolve_path(base, j.at("output").get<std::string>());
    }
    config.emit_images = j.value("emit_images", false);
    config.threads = j.value("threads", 0);

    config.validate();
    return config;
}

}  // namespace splatloc

#include "splatloc/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace splatloc {

QuantizedKey quantize(const Pose& p, double rho_q, double rho_t) {
    const Pose c = canonicalized(p);
    QuantizedKey k;
    k.v[0] = std::llround(c.q.w() / rho_q);
    k.v[1] = std::llround(c.q.x() / rho_q);
    k.v[2] = std::llround(c.q.y() / rho_q);
    k.v[3] = std::llround(c.q.z() / rho_q);
    for (int i = 0; i < 3; ++i) {
        k.v[4 + i] = std::llround(c.t[i] / rho_t);
    }
    return k;
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::budget:
            return "budget";
        case Termination::h_threshold:
            return "h_threshold";
        case Termination::stagnation:
            return "stagnation";
    }
    return "?";
}

namespace {

double default_threshold(HeuristicKind kind, const ImageBuffer& query) {
    switch (kind) {
        case HeuristicKind::sad:
            // 0.5% of the query's total intensity.
            return 0.005 * query.total_intensity();
        case HeuristicKind::psnr:
            return 0.5;  // PSNR above 99.5 dB
        case HeuristicKind::ssim:
            return 0.005;  // SSIM above 0.995
    }
    return 0.0;
}

struct Node {
    Pose pose;
    int g = 0;
    double h = 0.0;
    double f = 0.0;
    std::int64_t seq = 0;
    std::int64_t parent_seq = -1;
    bool closed = false;
};

struct HeapEntry {
    double f;
    std::int64_t seq;
    std::uint32_t id;
    bool operator>(const HeapEntry& o) const {
        if (f != o.f) {
            return f > o.f;
        }
        return seq > o.seq;
    }
};

}  // namespace

RefinementResult refine(const Scene& scene, const Camera& cam, const ImageBuffer& query,
                        const Pose& initial, const StepSchedule& schedule, HeuristicKind kind,
                        const SearchOptions& opts) {
    cam.validate();
    schedule.validate();
    if (query.width != cam.width || query.height != cam.height) {
        throw std::invalid_argument("refine: query dimensions do not match the camera");
    }

    Camera search_cam = cam;
    ImageBuffer search_query = query;
    if (opts.decimation > 1) {
        search_cam = cam.decimated(opts.decimation);
        search_query = downsample(query, opts.decimation);
    }

    std::optional<HeuristicEvaluator> evaluator;
    if (!opts.heuristic_override) {
        evaluator.emplace(kind, search_query);
    }
    auto score = [&](const ImageBuffer& img) {
        return opts.heuristic_override ? opts.heuristic_override(img) : (*evaluator)(img);
    };

    RenderOptions render_opts;
    render_opts.opacity_mode = opts.opacity_mode;
    render_opts.threads = opts.render_threads;

    const double h_threshold =
        opts.h_threshold ? *opts.h_threshold : default_threshold(kind, search_query);
    const double lambda = opts.g_weight;

    RefinementResult result;
    result.best_pose = normalized(initial);
    result.best_h = score(render(scene, search_cam, result.best_pose, render_opts));
    result.renders = 1;

    std::int64_t next_seq = 0;

    for (std::size_t level = 0; level < schedule.levels.size(); ++level) {
        const StepLevel& step = schedule.levels[level];
        const double rho_q = step.dq / 2.0;
        const double rho_t = step.dt / 2.0;

        LevelStats stats;
        stats.level = static_cast<int>(level);
        stats.best_h = result.best_h;

        // Destination already reached: nothing to search at this or any
        // finer level.
        if (result.best_h < h_threshold) {
            stats.terminated_by = Termination::h_threshold;
            result.per_level_stats.push_back(stats);
            result.terminated_by = Termination::h_threshold;
            break;
        }

        std::vector<Node> arena;
        std::unordered_map<QuantizedKey, std::uint32_t, QuantizedKeyHash> known;
        std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<HeapEntry>> open;

        auto push_node = [&](const Pose& pose, const QuantizedKey& key, int g, double h,
                             std::int64_t parent_seq) {
            Node n;
            n.pose = pose;
            n.g = g;
            n.h = h;
            n.f = lambda * g + h;
            n.seq = next_seq++;
            n.parent_seq = parent_seq;
            const auto id = static_cast<std::uint32_t>(arena.size());
            arena.push_back(n);
            known.emplace(key, id);
            open.push({n.f, n.seq, id});
        };

        push_node(result.best_pose, quantize(result.best_pose, rho_q, rho_t), 0, result.best_h, -1);

        int stagnation = 0;
        Termination level_term = Termination::budget;
        bool level_done = false;
        while (!level_done) {
            if (stats.expansions >= step.budget) {
                level_term = Termination::budget;
                break;
            }
            // Pop the globally minimal (f, seq), skipping entries made stale
            // by g updates.
            Node* node = nullptr;
            QuantizedKey node_key{};
            while (!open.empty()) {
                const HeapEntry top = open.top();
                open.pop();
                Node& cand = arena[top.id];
                if (cand.closed || top.f != cand.f) {
                    continue;
                }
                node = &cand;
                break;
            }
            if (node == nullptr) {
                level_term = Termination::stagnation;  // frontier exhausted
                break;
            }
            node->closed = true;
            node_key = quantize(node->pose, rho_q, rho_t);

            ++stats.expansions;
            ++result.expansions;
            if (opts.record_trace) {
                result.trace.push_back({node->seq, node_key, node->g, node->h, node->f,
                                        static_cast<int>(level), node->parent_seq});
            }

            bool improved = false;
            const std::vector<Pose> nbrs = neighbors(node->pose, step.dq, step.dt);
            const int parent_g = node->g;
            const double parent_h = node->h;
            const std::int64_t parent_seq = node->seq;
            for (const Pose& nb : nbrs) {
                const QuantizedKey key = quantize(nb, rho_q, rho_t);
                const auto it = known.find(key);
                const int tentative_g = parent_g + 1;
                if (it != known.end()) {
                    Node& existing = arena[it->second];
                    if (existing.closed) {
                        continue;
                    }
                    if (tentative_g < existing.g) {
                        existing.g = tentative_g;
                        existing.parent_seq = parent_seq;
                        const double new_f = lambda * existing.g + existing.h;
                        if (new_f != existing.f) {
                            existing.f = new_f;
                            open.push({existing.f, existing.seq, it->second});
                        }
                    }
                    continue;
                }
                const double h = score(render(scene, search_cam, nb, render_opts));
                ++result.renders;
                if (opts.record_trace) {
                    result.edges.push_back({parent_h, h});
                }
                push_node(nb, key, tentative_g, h, parent_seq);
                if (h < result.best_h) {
                    result.best_h = h;
                    result.best_pose = nb;
                    improved = true;
                }
            }

            if (result.best_h < h_threshold) {
                level_term = Termination::h_threshold;
                level_done = true;
            } else if (improved) {
                stagnation = 0;
            } else if (++stagnation >= opts.stagnation_limit) {
                level_term = Termination::stagnation;
                level_done = true;
            }
        }

        stats.best_h = result.best_h;
        stats.terminated_by = level_term;
        result.per_level_stats.push_back(stats);
        result.terminated_by = level_term;
        if (level_term == Termination::h_threshold) {
            break;
        }
    }
    return result;
}

double consistency_violation_rate(const RefinementResult& r) {
    if (r.edges.empty()) {
        return 0.0;
    }
    std::size_t violations = 0;
    for (const EdgeSample& e : r.edges) {
        if (e.h_parent > 1.0 + e.h_child) {
            ++violations;
        }
    }
    return static_cast<double>(violations) / static_cast<double>(r.edges.size());
}

void write_trace_jsonl(const std::string& path, const RefinementResult& r) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write trace file: " + path);
    }
    out.precision(17);
    for (const TraceEntry& e : r.trace) {
        out << "{\"seq\":" << e.seq << ",\"key\":[";
        for (std::size_t i = 0; i < e.key.v.size(); ++i) {
            out << e.key.v[i] << (i + 1 < e.key.v.size() ? "," : "");
        }
        out << "],\"g\":" << e.g << ",\"h\":" << e.h << ",\"f\":" << e.f << "}\n";
    }
}

}  // namespace splatloc

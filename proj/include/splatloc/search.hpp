#pragma once

#include "splatloc/image.hpp"
#include "splatloc/metrics.hpp"
#include "splatloc/pose.hpp"
#include "splatloc/renderer.hpp"
#include "splatloc/scene.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace splatloc {

// Discrete identity of a pose on the search lattice: componentwise rounding
// of the canonicalized pose at resolution (rho_q, rho_t). The search ties
// rho = delta/2 to the current level so distinct lattice moves never alias.
struct QuantizedKey {
    std::array<std::int64_t, 7> v{};
    bool operator==(const QuantizedKey&) const = default;
};

struct QuantizedKeyHash {
    std::size_t operator()(const QuantizedKey& k) const {
        std::size_t h = 0xcbf29ce484222325ull;
        for (std::int64_t x : k.v) {
            h = (h ^ static_cast<std::size_t>(x)) * 0x100000001b3ull;
        }
        return h;
    }
};

QuantizedKey quantize(const Pose& p, double rho_q, double rho_t);

enum class Termination { budget, h_threshold, stagnation };
const char* to_string(Termination t);

struct TraceEntry {
    std::int64_t seq = 0;  // insertion sequence, the pop tie-break
    QuantizedKey key;
    int g = 0;
    double h = 0.0;
    double f = 0.0;
    int level = 0;
    std::int64_t parent_seq = -1;  // -1 for a level seed
};

struct LevelStats {
    int level = 0;
    int expansions = 0;
    double best_h = 0.0;
    Termination terminated_by = Termination::budget;
};

struct SearchOptions {
    double g_weight = 0.0;              // lambda in f = lambda*g + h
    std::optional<double> h_threshold;  // unset: a near-identical default per heuristic kind
    int stagnation_limit = 50;          // consecutive non-improving expansions ending a level
    int decimation = 1;                 // search-time render/compare at 1/N resolution
    OpacityMode opacity_mode = OpacityMode::direct;
    int render_threads = 1;
    bool record_trace = true;
    // Test hook replacing the image heuristic; takes the node's render.
    std::function<double(const ImageBuffer&)> heuristic_override;
};

struct EdgeSample {
    double h_parent = 0.0;
    double h_child = 0.0;
};

struct RefinementResult {
    Pose best_pose;
    double best_h = 0.0;
    int expansions = 0;  // total popped-and-expanded nodes across levels
    std::vector<LevelStats> per_level_stats;
    Termination terminated_by = Termination::budget;
    int renders = 0;
    std::vector<TraceEntry> trace;   // one entry per expansion, in pop order
    std::vector<EdgeSample> edges;   // (h parent, h child) for every rendered child
};

// Best-first refinement over the pose lattice, one search per schedule level,
// each seeded at the incumbent best pose. A level ends at its expansion
// budget, when best h drops below the threshold (which also ends the whole
// refinement: the destination is reached), or on stagnation. The result is
// the minimum-h pose ever rendered, the initial pose included.
RefinementResult refine(const Scene& scene, const Camera& cam, const ImageBuffer& query,
                        const Pose& initial, const StepSchedule& schedule, HeuristicKind kind,
                        const SearchOptions& opts = {});

inline const std::vector<TraceEntry>& expansion_trace(const RefinementResult& r) {
    return r.trace;
}

// Fraction of recorded parent->child edges violating h(parent) <= 1 + h(child)
// (unit edge cost). Reported, not asserted: a pixel-sum heuristic is not
// consistent in general.
double consistency_violation_rate(const RefinementResult& r);

// One `{"seq":..,"key":[..7 ints..],"g":..,"h":..,"f":..}` line per popped node.
void write_trace_jsonl(const std::string& path, const RefinementResult& r);

}  // namespace splatloc

#pragma once

#include "splatloc/image.hpp"

#include <string>
#include <vector>

namespace splatloc {

// Sum over all pixels and channels of |a - b|.
double sum_abs_diff(const ImageBuffer& a, const ImageBuffer& b);

// 10*log10(1/MSE) on [0,1] values, capped at 100 when MSE < 1e-10.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

// Mean SSIM over channels with the canonical 11x11 Gaussian window
// (sigma 1.5, C1=0.01^2, C2=0.03^2), averaged over window centers where the
// full window fits. Requires min(width, height) >= 11.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

enum class HeuristicKind { sad, psnr, ssim };

HeuristicKind heuristic_kind_from_string(const std::string& s);
const char* to_string(HeuristicKind kind);

// Image-difference cost: >= 0, zero only for (near-)identical images.
// sad -> sum_abs_diff; psnr -> 100 - psnr; ssim -> 1 - ssim.
double heuristic(HeuristicKind kind, const ImageBuffer& query, const ImageBuffer& render);

// heuristic() bound to a fixed query image. For SSIM the query-side window
// moments are precomputed once, which matters when a search scores thousands
// of renders against one query.
class HeuristicEvaluator {
public:
    HeuristicEvaluator(HeuristicKind kind, ImageBuffer query);

    double operator()(const ImageBuffer& render) const;

    HeuristicKind kind() const { return kind_; }
    const ImageBuffer& query() const { return query_; }

private:
    HeuristicKind kind_;
    ImageBuffer query_;
    // Per channel: raw plane, filtered mean, filtered mean of squares.
    std::vector<std::vector<double>> q_plane_;
    std::vector<std::vector<double>> q_mu_;
    std::vector<std::vector<double>> q_musq_;
};

}  // namespace splatloc

#pragma once

#include "splatloc/image.hpp"
#include "splatloc/pose.hpp"
#include "splatloc/scene.hpp"

#include <Eigen/Dense>
#include <optional>

namespace splatloc {

// Pinhole intrinsics. Pixel (row, col) samples the image plane at exactly
// (u, v) = (col, row), so a Gaussian on the optical axis lands on the pixel
// whose coordinates equal (cx, cy).
struct Camera {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    double near = 0.01;

    void validate() const;
    // Intrinsics and extent scaled down by an integer factor.
    Camera decimated(int factor) const;
};

enum class OpacityMode {
    direct,  // use the stored activated opacity as alpha
    eq4,     // alpha = 1 - exp(-opacity / sqrt(det(covariance3d)))
};

struct ProjectedGaussian {
    Eigen::Vector2d mean_px;  // (u, v) pixel coordinates
    Eigen::Matrix2d cov_px;   // includes the 0.3-pixel low-pass floor
    double depth = 0.0;       // camera-space z
    double alpha = 0.0;
    Eigen::Vector3d color;
};

double effective_alpha(const GaussianPrimitive& g, OpacityMode mode);

// EWA projection: world -> camera by the pose, perspective Jacobian at the
// camera-space mean, cov_px = J W Sigma W^T J^T + 0.3 I. Returns nullopt for
// depth <= near or means farther than 3 sigma outside the image bounds.
std::optional<ProjectedGaussian> project(const GaussianPrimitive& g, const Camera& cam,
                                         const Pose& pose, OpacityMode mode = OpacityMode::direct);

// exp(-0.5 * (x - mean)^T cov^-1 (x - mean)), in (0, 1].
double gaussian_weight(const ProjectedGaussian& pg, const Eigen::Vector2d& x);

struct RenderOptions {
    OpacityMode opacity_mode = OpacityMode::direct;
    int threads = 1;  // <= 1: single-threaded; output is identical either way
};

// Front-to-back alpha compositing over the depth-sorted projected Gaussians
// (depth ties broken by primitive index). Per pixel: contributions with
// weight*alpha < 1/255 are skipped, accumulation stops once transmittance
// drops below 1e-4, and the background is weighted by the final transmittance.
ImageBuffer render(const Scene& scene, const Camera& cam, const Pose& pose,
                   const RenderOptions& opts = {});

}  // namespace splatloc

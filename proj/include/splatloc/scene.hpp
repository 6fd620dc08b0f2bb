#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace splatloc {

// One anisotropic 3D Gaussian. Scale components are positive scene units,
// opacity is stored post-activation in [0, 1], color is linear RGB in [0, 1]
// (the DC band of the splat export, higher bands are dropped on load).
struct GaussianPrimitive {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Quaterniond rot{1.0, 0.0, 0.0, 0.0};
    Eigen::Vector3d scale = Eigen::Vector3d::Ones();
    double opacity = 1.0;
    Eigen::Vector3d color = Eigen::Vector3d::Ones();
};

struct Scene {
    std::vector<GaussianPrimitive> primitives;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
};

// Sigma = R * diag(s)^2 * R^T, symmetric positive definite.
Eigen::Matrix3d covariance3d(const GaussianPrimitive& g);

// Binary little-endian splat PLY. Required vertex properties:
// x,y,z, f_dc_0..2, opacity, scale_0..2, rot_0..3; anything else
// (f_rest_*, normals, ...) is read and ignored. On load: color =
// clamp(0.5 + C0*f_dc), scale = exp(scale), opacity = sigmoid(opacity),
// rot normalized. write_ply applies the inverse mapping.
Scene load_ply(const std::string& path);
void write_ply(const std::string& path, const Scene& scene);

// Native JSON scene format:
// {"background":[r,g,b],
//  "primitives":[{"mean":[..],"rot":[w,x,y,z],"scale":[..],"opacity":o,"color":[..]}]}
Scene load_scene_json(const std::string& path);
void save_scene_json(const std::string& path, const Scene& scene);

struct SyntheticSpec {
    int count = 500;
    double extent = 1.0;  // means uniform in [-extent/2, extent/2]^3
    std::pair<double, double> scale_range{0.01, 0.05};  // log-uniform
    std::pair<double, double> opacity_range{0.2, 0.95};
    std::uint64_t seed = 0;
};

// Deterministic-for-seed desk-scale scene: uniform means, uniform random
// rotations, log-uniform scales, uniform opacities and colors.
Scene generate_synthetic(const SyntheticSpec& spec);

constexpr double kShC0 = 0.28209479177387814;

}  // namespace splatloc

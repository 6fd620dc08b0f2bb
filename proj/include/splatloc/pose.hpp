#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace splatloc {

// Camera extrinsics as a world-to-camera transform: x_cam = R(q) * x_world + t.
// Quaternion is (w, x, y, z), kept unit-normalized and canonicalized so that
// q and -q never denote two distinct poses (qw >= 0, ties broken by the first
// nonzero vector component).
struct Pose {
    Eigen::Quaterniond q{1.0, 0.0, 0.0, 0.0};
    Eigen::Vector3d t{0.0, 0.0, 0.0};

    static Pose identity() { return Pose{}; }

    Eigen::Matrix3d rotation() const { return q.toRotationMatrix(); }
    // Camera center in world coordinates: -R(q)^T * t.
    Eigen::Vector3d center() const { return -(q.toRotationMatrix().transpose() * t); }
};

struct PoseError {
    double translation = 0.0;  // scene units
    double rotation = 0.0;     // degrees, in [0, 180]
};

// Coarse-to-fine perturbation magnitudes. dq is a quaternion-component step
// (the induced rotation angle of one lattice move is 2*dq radians), dt a
// translation step in scene units. Levels must strictly decrease in both.
struct StepLevel {
    double dq = 0.0;
    double dt = 0.0;
    int budget = 0;  // max node expansions at this level
};

struct StepSchedule {
    std::vector<StepLevel> levels;

    static StepSchedule defaults();
    // Throws std::invalid_argument on empty/non-decreasing/zero-budget schedules.
    void validate() const;
};

Pose canonicalized(const Pose& p);
Pose normalized(const Pose& p);

// compose(a, b) applies b first, then a: x -> R_a (R_b x + t_b) + t_a.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

// The 12 single-axis lattice moves around p, in fixed order:
// translations +x,-x,+y,-y,+z,-z (camera frame, magnitude dt), then
// rotations about the same axes (right-multiplied axis-angle, angle 2*dq).
std::vector<Pose> neighbors(const Pose& p, double dq, double dt);

// Component-wise uniform noise in [-scale, +scale] on each quaternion and
// translation component, then renormalize + canonicalize. Draw order is
// qw,qx,qy,qz,tx,ty,tz so results are stable across platforms. A degenerate
// quaternion (norm < 1e-12) is resampled with seed+1.
Pose inject_noise(const Pose& p, double q_scale, double t_scale, std::uint64_t seed);

// translation: distance between camera centers; rotation: 2*acos(|<q_a,q_b>|).
PoseError pose_error(const Pose& estimate, const Pose& gt);

// Component-wise medians (lower median for even counts).
PoseError median_errors(const std::vector<std::pair<Pose, Pose>>& pairs);

// Pose text format: `name qw qx qy qz tx ty tz` per line, '#' comments.
struct NamedPose {
    std::string name;
    Pose pose;
};

std::vector<NamedPose> load_pose_file(const std::string& path);
void save_pose_file(const std::string& path, const std::vector<NamedPose>& poses);

}  // namespace splatloc

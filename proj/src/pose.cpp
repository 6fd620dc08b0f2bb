#include "splatloc/pose.hpp"

#include "splatloc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace splatloc {

StepSchedule StepSchedule::defaults() {
    return StepSchedule{{{8e-3, 8e-2, 200}, {2e-3, 2e-2, 100}, {5e-4, 5e-3, 100}}};
}

void StepSchedule::validate() const {
    if (levels.empty()) {
        throw std::invalid_argument("step schedule must have at least one level");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto& lv = levels[i];
        if (!(lv.dq > 0.0) || !(lv.dt > 0.0)) {
            throw std::invalid_argument("step schedule deltas must be positive");
        }
        if (lv.budget < 1) {
            throw std::invalid_argument("step schedule budgets must be >= 1");
        }
        if (i > 0 && !(lv.dq < levels[i - 1].dq && lv.dt < levels[i - 1].dt)) {
            throw std::invalid_argument("step schedule levels must strictly decrease in dq and dt");
        }
    }
}

Pose canonicalized(const Pose& p) {
    Pose out = p;
    const double* c = out.q.coeffs().data();  // (x, y, z, w)
    double lead = c[3];
    if (lead == 0.0) {
        lead = c[0] != 0.0 ? c[0] : (c[1] != 0.0 ? c[1] : c[2]);
    }
    if (lead < 0.0) {
        out.q.coeffs() = -out.q.coeffs();
    }
    return out;
}

Pose normalized(const Pose& p) {
    Pose out = p;
    out.q.normalize();
    return canonicalized(out);
}

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.q = a.q * b.q;
    out.t = a.q.toRotationMatrix() * b.t + a.t;
    return normalized(out);
}

Pose inverse(const Pose& p) {
    Pose out;
    out.q = p.q.conjugate();
    out.t = -(out.q.toRotationMatrix() * p.t);
    return normalized(out);
}

std::vector<Pose> neighbors(const Pose& p, double dq, double dt) {
    std::vector<Pose> out;
    out.reserve(12);
    for (int axis = 0; axis < 3; ++axis) {
        for (double sign : {1.0, -1.0}) {
            Pose n = p;
            n.t[axis] += sign * dt;
            out.push_back(normalized(n));
        }
    }
    const double c = std::cos(dq);
    const double s = std::sin(dq);
    for (int axis = 0; axis < 3; ++axis) {
        for (double sign : {1.0, -1.0}) {
            Eigen::Vector3d v = Eigen::Vector3d::Zero();
            v[axis] = sign * s;
            Eigen::Quaterniond step(c, v.x(), v.y(), v.z());
            Pose n = p;
            n.q = p.q * step;
            out.push_back(normalized(n));
        }
    }
    return out;
}

Pose inject_noise(const Pose& p, double q_scale, double t_scale, std::uint64_t seed) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        Rng rng(seed + static_cast<std::uint64_t>(attempt));
        const double w = p.q.w() + rng.uniform(-q_scale, q_scale);
        const double x = p.q.x() + rng.uniform(-q_scale, q_scale);
        const double y = p.q.y() + rng.uniform(-q_scale, q_scale);
        const double z = p.q.z() + rng.uniform(-q_scale, q_scale);
        Eigen::Vector3d t = p.t;
        for (int i = 0; i < 3; ++i) {
            t[i] += rng.uniform(-t_scale, t_scale);
        }
        const double norm = std::sqrt(w * w + x * x + y * y + z * z);
        if (norm < 1e-12) {
            continue;
        }
        Pose out;
        out.q = Eigen::Quaterniond(w, x, y, z);
        out.t = t;
        return normalized(out);
    }
    throw std::runtime_error("inject_noise: could not draw a non-degenerate quaternion");
}

PoseError pose_error(const Pose& estimate, const Pose& gt) {
    PoseError err;
    err.translation = (estimate.center() - gt.center()).norm();
    const double dot = std::min(1.0, std::abs(estimate.q.dot(gt.q)));
    err.rotation = 2.0 * std::acos(dot) * 180.0 / M_PI;
    return err;
}

namespace {

double lower_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

}  // namespace

PoseError median_errors(const std::vector<std::pair<Pose, Pose>>& pairs) {
    if (pairs.empty()) {
        throw std::invalid_argument("median_errors: empty input");
    }
    std::vector<double> terr, rerr;
    terr.reserve(pairs.size());
    rerr.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        const PoseError e = pose_error(a, b);
        terr.push_back(e.translation);
        rerr.push_back(e.rotation);
    }
    return PoseError{lower_median(std::move(terr)), lower_median(std::move(rerr))};
}

std::vector<NamedPose> load_pose_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open pose file: " + path);
    }
    std::vector<NamedPose> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ss(line);
        NamedPose np;
        double w, x, y, z;
        if (!(ss >> np.name)) {
            continue;  // blank or comment-only line
        }
        if (!(ss >> w >> x >> y >> z >> np.pose.t.x() >> np.pose.t.y() >> np.pose.t.z())) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed pose line");
        }
        np.pose.q = Eigen::Quaterniond(w, x, y, z);
        np.pose = normalized(np.pose);
        out.push_back(std::move(np));
    }
    return out;
}

void save_pose_file(const std::string& path, const std::vector<NamedPose>& poses) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write pose file: " + path);
    }
    out.precision(17);
    for (const auto& np : poses) {
        const auto& p = np.pose;
        out << np.name << ' ' << p.q.w() << ' ' << p.q.x() << ' ' << p.q.y() << ' ' << p.q.z()
            << ' ' << p.t.x() << ' ' << p.t.y() << ' ' << p.t.z() << '\n';
    }
}

}  // namespace splatloc

#include "splatloc/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

namespace splatloc {

namespace {

constexpr double kLowPassFloor = 0.3;
constexpr double kMinContribution = 1.0 / 255.0;
constexpr double kMinTransmittance = 1e-4;

}  // namespace

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw std::invalid_argument("camera: focal lengths must be positive");
    }
    if (width < 1 || height < 1) {
        throw std::invalid_argument("camera: image dimensions must be >= 1");
    }
    if (!(near > 0.0)) {
        throw std::invalid_argument("camera: near plane must be positive");
    }
}

Camera Camera::decimated(int factor) const {
    if (factor < 1) {
        throw std::invalid_argument("camera: decimation factor must be >= 1");
    }
    Camera c = *this;
    const double f = static_cast<double>(factor);
    c.fx /= f;
    c.fy /= f;
    // Low-res pixel u' samples the full-res position f*u' + (f-1)/2, the
    // center of the box that downsample() averages.
    c.cx = (cx - (f - 1.0) / 2.0) / f;
    c.cy = (cy - (f - 1.0) / 2.0) / f;
    c.width = (width + factor - 1) / factor;
    c.height = (height + factor - 1) / factor;
    return c;
}

double effective_alpha(const GaussianPrimitive& g, OpacityMode mode) {
    if (mode == OpacityMode::direct) {
        return g.opacity;
    }
    const double det = covariance3d(g).determinant();
    return 1.0 - std::exp(-g.opacity / std::sqrt(det));
}

std::optional<ProjectedGaussian> project(const GaussianPrimitive& g, const Camera& cam,
                                         const Pose& pose, OpacityMode mode) {
    const Eigen::Matrix3d w = pose.rotation();
    const Eigen::Vector3d mean_cam = w * g.mean + pose.t;
    const double z = mean_cam.z();
    if (z <= cam.near) {
        return std::nullopt;
    }

    const double inv_z = 1.0 / z;
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx * inv_z, 0.0, -cam.fx * mean_cam.x() * inv_z * inv_z,
           0.0, cam.fy * inv_z, -cam.fy * mean_cam.y() * inv_z * inv_z;

    ProjectedGaussian pg;
    pg.mean_px = {cam.fx * mean_cam.x() * inv_z + cam.cx, cam.fy * mean_cam.y() * inv_z + cam.cy};
    pg.cov_px = jac * w * covariance3d(g) * w.transpose() * jac.transpose();
    pg.cov_px(0, 0) += kLowPassFloor;
    pg.cov_px(1, 1) += kLowPassFloor;

    const double sx = 3.0 * std::sqrt(pg.cov_px(0, 0));
    const double sy = 3.0 * std::sqrt(pg.cov_px(1, 1));
    if (pg.mean_px.x() < -sx || pg.mean_px.x() > cam.width - 1 + sx || pg.mean_px.y() < -sy ||
        pg.mean_px.y() > cam.height - 1 + sy) {
        return std::nullopt;
    }

    pg.depth = z;
    pg.alpha = effective_alpha(g, mode);
    pg.color = g.color;
    return pg;
}

double gaussian_weight(const ProjectedGaussian& pg, const Eigen::Vector2d& x) {
    const Eigen::Vector2d d = x - pg.mean_px;
    const double m = d.dot(pg.cov_px.inverse() * d);
    return std::exp(-0.5 * m);
}

namespace {

// Projected Gaussian prepared for rasterization: inverse covariance, a
// Mahalanobis cutoff at which weight*alpha falls below 1/255, and the
// conservative pixel bounding box of that cutoff ellipse.
struct Splat {
    double mx, my;
    double ia, ib, ic;  // inverse covariance [ia ib; ib ic]
    double m_cut;
    double alpha;
    Eigen::Vector3d color;
    int x0, x1, y0, y1;  // inclusive pixel bounds
};

void rasterize_rows(const std::vector<Splat>& splats, const Eigen::Vector3d& background,
                    int width, int row_begin, int row_end, ImageBuffer& out) {
    const int rows = row_end - row_begin;
    if (rows <= 0) {
        return;
    }
    std::vector<double> trans(static_cast<std::size_t>(rows) * width, 1.0);
    std::size_t active = trans.size();

    // Splat-major over the global depth order; per pixel this reproduces the
    // gather order exactly, so the band partition never changes the output.
    for (const Splat& s : splats) {
        if (active == 0) {
            break;
        }
        if (s.y1 < row_begin || s.y0 >= row_end) {
            continue;
        }
        const int ry0 = std::max(s.y0, row_begin);
        const int ry1 = std::min(s.y1, row_end - 1);
        for (int y = ry0; y <= ry1; ++y) {
            const double dy = y - s.my;
            double* trow = trans.data() + static_cast<std::size_t>(y - row_begin) * width;
            for (int x = s.x0; x <= s.x1; ++x) {
                double& t = trow[x];
                if (t < kMinTransmittance) {
                    continue;
                }
                const double dx = x - s.mx;
                const double m = s.ia * dx * dx + 2.0 * s.ib * dx * dy + s.ic * dy * dy;
                if (m > s.m_cut) {
                    continue;
                }
                const double wgt = s.alpha * std::exp(-0.5 * m);
                if (wgt < kMinContribution) {
                    continue;
                }
                const double contrib = t * wgt;
                out.at(y, x, 0) += contrib * s.color[0];
                out.at(y, x, 1) += contrib * s.color[1];
                out.at(y, x, 2) += contrib * s.color[2];
                t *= 1.0 - wgt;
                if (t < kMinTransmittance) {
                    --active;
                }
            }
        }
    }

    for (int y = row_begin; y < row_end; ++y) {
        const double* trow = trans.data() + static_cast<std::size_t>(y - row_begin) * width;
        for (int x = 0; x < width; ++x) {
            out.at(y, x, 0) += trow[x] * background[0];
            out.at(y, x, 1) += trow[x] * background[1];
            out.at(y, x, 2) += trow[x] * background[2];
        }
    }
}

}  // namespace

ImageBuffer render(const Scene& scene, const Camera& cam, const Pose& pose,
                   const RenderOptions& opts) {
    cam.validate();
    ImageBuffer out(cam.width, cam.height);

    struct Entry {
        ProjectedGaussian pg;
        std::size_t index;
    };
    std::vector<Entry> projected;
    projected.reserve(scene.primitives.size());
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        if (auto pg = project(scene.primitives[i], cam, pose, opts.opacity_mode)) {
            projected.push_back({*pg, i});
        }
    }
    std::sort(projected.begin(), projected.end(), [](const Entry& a, const Entry& b) {
        if (a.pg.depth != b.pg.depth) {
            return a.pg.depth < b.pg.depth;
        }
        return a.index < b.index;
    });

    std::vector<Splat> splats;
    splats.reserve(projected.size());
    for (const Entry& e : projected) {
        const ProjectedGaussian& pg = e.pg;
        if (pg.alpha * 255.0 < 1.0) {
            continue;  // can never contribute at or above the 1/255 cutoff
        }
        Splat s;
        s.mx = pg.mean_px.x();
        s.my = pg.mean_px.y();
        const double det = pg.cov_px.determinant();
        const double inv_det = 1.0 / det;
        s.ia = pg.cov_px(1, 1) * inv_det;
        s.ib = -pg.cov_px(0, 1) * inv_det;
        s.ic = pg.cov_px(0, 0) * inv_det;
        s.m_cut = 2.0 * std::log(255.0 * pg.alpha);
        s.alpha = pg.alpha;
        s.color = pg.color;
        const double rx = std::sqrt(s.m_cut * pg.cov_px(0, 0));
        const double ry = std::sqrt(s.m_cut * pg.cov_px(1, 1));
        s.x0 = std::max(0, static_cast<int>(std::ceil(s.mx - rx)));
        s.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(s.mx + rx)));
        s.y0 = std::max(0, static_cast<int>(std::ceil(s.my - ry)));
        s.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(s.my + ry)));
        if (s.x0 > s.x1 || s.y0 > s.y1) {
            continue;
        }
        splats.push_back(s);
    }

    const int threads = std::max(1, opts.threads);
    if (threads == 1) {
        rasterize_rows(splats, scene.background, cam.width, 0, cam.height, out);
        return out;
    }

    const int bands = std::min(threads, cam.height);
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(bands));
    for (int b = 0; b < bands; ++b) {
        const int r0 = static_cast<int>(static_cast<std::int64_t>(cam.height) * b / bands);
        const int r1 = static_cast<int>(static_cast<std::int64_t>(cam.height) * (b + 1) / bands);
        workers.emplace_back([&, r0, r1] {
            rasterize_rows(splats, scene.background, cam.width, r0, r1, out);
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    return out;
}

}  // namespace splatloc

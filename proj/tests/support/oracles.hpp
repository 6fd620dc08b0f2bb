#pragma once

// Independent reference implementations used to cross-check the production
// code. Everything here is deliberately written the slow, obvious way and
// must not share code paths with src/.

#include "splatloc/image.hpp"
#include "splatloc/renderer.hpp"
#include "splatloc/scene.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracles {

// Per-pixel gather compositor: for every pixel walk the depth-sorted
// projected list and apply the compositing contract directly.
inline splatloc::ImageBuffer reference_render(const splatloc::Scene& scene,
                                              const splatloc::Camera& cam,
                                              const splatloc::Pose& pose,
                                              splatloc::OpacityMode mode = splatloc::OpacityMode::direct) {
    struct Proj {
        splatloc::ProjectedGaussian pg;
        std::size_t index;
    };
    std::vector<Proj> projected;
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        if (auto pg = splatloc::project(scene.primitives[i], cam, pose, mode)) {
            projected.push_back({*pg, i});
        }
    }
    std::stable_sort(projected.begin(), projected.end(), [](const Proj& a, const Proj& b) {
        if (a.pg.depth != b.pg.depth) {
            return a.pg.depth < b.pg.depth;
        }
        return a.index < b.index;
    });

    splatloc::ImageBuffer out(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            double transmittance = 1.0;
            for (const Proj& p : projected) {
                if (transmittance < 1e-4) {
                    break;
                }
                const double w =
                    p.pg.alpha * splatloc::gaussian_weight(p.pg, {static_cast<double>(x),
                                                                  static_cast<double>(y)});
                if (w < 1.0 / 255.0) {
                    continue;
                }
                color += transmittance * w * p.pg.color;
                transmittance *= 1.0 - w;
            }
            color += transmittance * scene.background;
            out.set_pixel(y, x, color);
        }
    }
    return out;
}

inline double naive_sad(const splatloc::ImageBuffer& a, const splatloc::ImageBuffer& b) {
    double s = 0.0;
    for (int r = 0; r < a.height; ++r) {
        for (int c = 0; c < a.width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                s += std::abs(a.at(r, c, ch) - b.at(r, c, ch));
            }
        }
    }
    return s;
}

inline double naive_psnr(const splatloc::ImageBuffer& a, const splatloc::ImageBuffer& b) {
    double se = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < a.height; ++r) {
        for (int c = 0; c < a.width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                const double d = a.at(r, c, ch) - b.at(r, c, ch);
                se += d * d;
                ++n;
            }
        }
    }
    const double mse = se / static_cast<double>(n);
    if (mse < 1e-10) {
        return 100.0;
    }
    return 10.0 * std::log10(1.0 / mse);
}

// Direct sliding-window SSIM: recompute the weighted moments inside every
// 11x11 window from scratch.
inline double naive_ssim(const splatloc::ImageBuffer& a, const splatloc::ImageBuffer& b) {
    constexpr int kWin = 11;
    constexpr int kHalf = 5;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;

    double w[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            const double di = i - kHalf, dj = j - kHalf;
            w[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
            wsum += w[i][j];
        }
    }
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            w[i][j] /= wsum;
        }
    }

    double total = 0.0;
    std::size_t count = 0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int r = kHalf; r < a.height - kHalf; ++r) {
            for (int c = kHalf; c < a.width - kHalf; ++c) {
                double mu_a = 0.0, mu_b = 0.0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        mu_a += w[i][j] * a.at(r + i - kHalf, c + j - kHalf, ch);
                        mu_b += w[i][j] * b.at(r + i - kHalf, c + j - kHalf, ch);
                    }
                }
                double var_a = 0.0, var_b = 0.0, cov = 0.0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        const double da = a.at(r + i - kHalf, c + j - kHalf, ch) - mu_a;
                        const double db = b.at(r + i - kHalf, c + j - kHalf, ch) - mu_b;
                        var_a += w[i][j] * da * da;
                        var_b += w[i][j] * db * db;
                        cov += w[i][j] * da * db;
                    }
                }
                total += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

inline splatloc::ImageBuffer random_image(int width, int height, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    splatloc::ImageBuffer img(width, height);
    for (double& v : img.data) {
        v = dist(rng);
    }
    return img;
}

}  // namespace oracles

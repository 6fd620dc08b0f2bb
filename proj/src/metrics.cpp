#include "splatloc/metrics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace splatloc {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_same_size(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
    if (!a.same_size(b)) {
        throw std::invalid_argument(std::string(op) + ": image dimensions differ");
    }
}

const std::array<double, kWindow>& ssim_kernel() {
    static const std::array<double, kWindow> kernel = [] {
        std::array<double, kWindow> k{};
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - kHalf;
            k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
            sum += k[i];
        }
        for (double& v : k) {
            v /= sum;
        }
        return k;
    }();
    return kernel;
}

// Valid-mode separable Gaussian filter: (H x W) -> (H-10 x W-10).
void filter_valid(const std::vector<double>& in, int width, int height, std::vector<double>& tmp,
                  std::vector<double>& out) {
    const auto& k = ssim_kernel();
    const int vw = width - 2 * kHalf;
    const int vh = height - 2 * kHalf;
    tmp.resize(static_cast<std::size_t>(height) * vw);
    out.resize(static_cast<std::size_t>(vh) * vw);
    for (int r = 0; r < height; ++r) {
        const double* row = in.data() + static_cast<std::size_t>(r) * width;
        double* trow = tmp.data() + static_cast<std::size_t>(r) * vw;
        for (int c = 0; c < vw; ++c) {
            double s = 0.0;
            for (int i = 0; i < kWindow; ++i) {
                s += k[i] * row[c + i];
            }
            trow[c] = s;
        }
    }
    for (int r = 0; r < vh; ++r) {
        double* orow = out.data() + static_cast<std::size_t>(r) * vw;
        for (int c = 0; c < vw; ++c) {
            double s = 0.0;
            for (int i = 0; i < kWindow; ++i) {
                s += k[i] * tmp[static_cast<std::size_t>(r + i) * vw + c];
            }
            orow[c] = s;
        }
    }
}

std::vector<double> channel_plane(const ImageBuffer& img, int ch) {
    std::vector<double> plane(static_cast<std::size_t>(img.width) * img.height);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            plane[static_cast<std::size_t>(r) * img.width + c] = img.at(r, c, ch);
        }
    }
    return plane;
}

void check_ssim_size(const ImageBuffer& a) {
    if (a.width < kWindow || a.height < kWindow) {
        throw std::invalid_argument("ssim: images must be at least 11x11");
    }
}

}  // namespace

double sum_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
    check_same_size(a, b, "sum_abs_diff");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        s += std::abs(a.data[i] - b.data[i]);
    }
    return s;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    check_same_size(a, b, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse < 1e-10) {
        return 100.0;
    }
    return -10.0 * std::log10(mse);
}

HeuristicEvaluator::HeuristicEvaluator(HeuristicKind kind, ImageBuffer query)
    : kind_(kind), query_(std::move(query)) {
    if (kind_ != HeuristicKind::ssim) {
        return;
    }
    check_ssim_size(query_);
    std::vector<double> tmp;
    q_plane_.resize(3);
    q_mu_.resize(3);
    q_musq_.resize(3);
    for (int ch = 0; ch < 3; ++ch) {
        q_plane_[ch] = channel_plane(query_, ch);
        filter_valid(q_plane_[ch], query_.width, query_.height, tmp, q_mu_[ch]);
        std::vector<double> sq(q_plane_[ch].size());
        for (std::size_t i = 0; i < sq.size(); ++i) {
            sq[i] = q_plane_[ch][i] * q_plane_[ch][i];
        }
        filter_valid(sq, query_.width, query_.height, tmp, q_musq_[ch]);
    }
}

double HeuristicEvaluator::operator()(const ImageBuffer& render) const {
    check_same_size(query_, render, "heuristic");
    switch (kind_) {
        case HeuristicKind::sad:
            return sum_abs_diff(query_, render);
        case HeuristicKind::psnr:
            return 100.0 - psnr(query_, render);
        case HeuristicKind::ssim:
            break;
    }

    const int width = query_.width;
    const int height = query_.height;
    const int vw = width - 2 * kHalf;
    const int vh = height - 2 * kHalf;
    std::vector<double> tmp, r_mu, r_musq, cross_mu;
    std::vector<double> buf(static_cast<std::size_t>(width) * height);

    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        const std::vector<double>& q = q_plane_[ch];
        std::vector<double> r = channel_plane(render, ch);
        filter_valid(r, width, height, tmp, r_mu);
        for (std::size_t i = 0; i < buf.size(); ++i) {
            buf[i] = r[i] * r[i];
        }
        filter_valid(buf, width, height, tmp, r_musq);
        for (std::size_t i = 0; i < buf.size(); ++i) {
            buf[i] = q[i] * r[i];
        }
        filter_valid(buf, width, height, tmp, cross_mu);

        const std::vector<double>& qmu = q_mu_[ch];
        const std::vector<double>& qmusq = q_musq_[ch];
        for (std::size_t i = 0; i < static_cast<std::size_t>(vw) * vh; ++i) {
            const double mu_q = qmu[i];
            const double mu_r = r_mu[i];
            const double var_q = qmusq[i] - mu_q * mu_q;
            const double var_r = r_musq[i] - mu_r * mu_r;
            const double cov = cross_mu[i] - mu_q * mu_r;
            const double num = (2.0 * mu_q * mu_r + kC1) * (2.0 * cov + kC2);
            const double den = (mu_q * mu_q + mu_r * mu_r + kC1) * (var_q + var_r + kC2);
            total += num / den;
        }
    }
    const double mean_ssim = total / (3.0 * static_cast<double>(vw) * static_cast<double>(vh));
    return 1.0 - mean_ssim;
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    check_same_size(a, b, "ssim");
    check_ssim_size(a);
    return 1.0 - HeuristicEvaluator(HeuristicKind::ssim, a)(b);
}

double heuristic(HeuristicKind kind, const ImageBuffer& query, const ImageBuffer& render) {
    return HeuristicEvaluator(kind, query)(render);
}

HeuristicKind heuristic_kind_from_string(const std::string& s) {
    if (s == "sad") {
        return HeuristicKind::sad;
    }
    if (s == "psnr") {
        return HeuristicKind::psnr;
    }
    if (s == "ssim") {
        return HeuristicKind::ssim;
    }
    throw std::invalid_argument("unknown heuristic kind: " + s);
}

const char* to_string(HeuristicKind kind) {
    switch (kind) {
        case HeuristicKind::sad:
            return "sad";
        case HeuristicKind::psnr:
            return "psnr";
        case HeuristicKind::ssim:
            return "ssim";
    }
    return "?";
}

}  // namespace splatloc

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace splatloc {

// Row-major H x W x 3 raster of linear RGB values in [0, 1]. Kept in double
// so metric evaluation is exact; quantization happens only at PNG export.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // size = height * width * 3

    ImageBuffer() = default;
    ImageBuffer(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    double& at(int row, int col, int ch) {
        return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
    }
    double at(int row, int col, int ch) const {
        return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
    }

    void set_pixel(int row, int col, const Eigen::Vector3d& rgb) {
        for (int c = 0; c < 3; ++c) {
            at(row, col, c) = rgb[c];
        }
    }
    Eigen::Vector3d pixel(int row, int col) const {
        return {at(row, col, 0), at(row, col, 1), at(row, col, 2)};
    }

    bool same_size(const ImageBuffer& other) const {
        return width == other.width && height == other.height;
    }

    double total_intensity() const {
        double s = 0.0;
        for (double v : data) {
            s += v;
        }
        return s;
    }
};

// Box-average downsampling by an integer factor (trailing partial pixels are
// averaged over the covered area). Used by the search decimation option.
ImageBuffer downsample(const ImageBuffer& img, int factor);

// 8-bit RGB PNG. Stored values are round(255 * clamp(v, 0, 1)); load maps
// bytes back with v = byte / 255. Values are linear-coded, no gamma.
void save_png(const std::string& path, const ImageBuffer& img);
ImageBuffer load_png(const std::string& path);

}  // namespace splatloc

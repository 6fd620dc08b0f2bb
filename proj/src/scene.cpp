#include "splatloc/scene.hpp"

#include "splatloc/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace splatloc {

Eigen::Matrix3d covariance3d(const GaussianPrimitive& g) {
    const Eigen::Matrix3d r = g.rot.toRotationMatrix();
    const Eigen::Matrix3d s2 = g.scale.cwiseProduct(g.scale).asDiagonal();
    return r * s2 * r.transpose();
}

namespace {

struct PlyProperty {
    std::string name;
    int byte_size = 0;  // 4 = float32, 8 = float64
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return std::log(p / (1.0 - p));
}

double read_scalar(const char* bytes, int byte_size) {
    if (byte_size == 4) {
        float v;
        std::memcpy(&v, bytes, 4);
        return static_cast<double>(v);
    }
    double v;
    std::memcpy(&v, bytes, 8);
    return v;
}

}  // namespace

Scene load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open PLY file: " + path);
    }

    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply") {
        throw std::runtime_error(path + ": not a PLY file");
    }

    std::size_t vertex_count = 0;
    bool saw_format = false;
    bool in_vertex_element = false;
    std::vector<PlyProperty> props;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        if (token == "comment" || token.empty()) {
            continue;
        }
        if (token == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt != "binary_little_endian") {
                throw std::runtime_error(path + ": unsupported PLY format '" + fmt + "'");
            }
            saw_format = true;
        } else if (token == "element") {
            std::string name;
            std::size_t count = 0;
            ss >> name >> count;
            if (name == "vertex") {
                vertex_count = count;
                in_vertex_element = true;
            } else {
                if (props.empty()) {
                    throw std::runtime_error(path + ": expected vertex as first element");
                }
                in_vertex_element = false;  // trailing elements are ignored
            }
        } else if (token == "property") {
            if (!in_vertex_element) {
                continue;
            }
            std::string type, name;
            ss >> type >> name;
            if (type == "list") {
                throw std::runtime_error(path + ": list properties are not supported");
            }
            int byte_size = 0;
            if (type == "float" || type == "float32") {
                byte_size = 4;
            } else if (type == "double" || type == "float64") {
                byte_size = 8;
            } else {
                throw std::runtime_error(path + ": unsupported property type '" + type + "'");
            }
            props.push_back({name, byte_size});
        } else if (token == "end_header") {
            break;
        }
    }
    if (!saw_format || vertex_count == 0 || props.empty()) {
        throw std::runtime_error(path + ": malformed PLY header");
    }

    auto find_prop = [&](const std::string& name) {
        for (std::size_t i = 0; i < props.size(); ++i) {
            if (props[i].name == name) {
                return static_cast<int>(i);
            }
        }
        throw std::runtime_error(path + ": missing required property '" + name + "'");
    };

    const int ix = find_prop("x"), iy = find_prop("y"), iz = find_prop("z");
    const int idc[3] = {find_prop("f_dc_0"), find_prop("f_dc_1"), find_prop("f_dc_2")};
    const int iop = find_prop("opacity");
    const int isc[3] = {find_prop("scale_0"), find_prop("scale_1"), find_prop("scale_2")};
    const int irot[4] = {find_prop("rot_0"), find_prop("rot_1"), find_prop("rot_2"), find_prop("rot_3")};

    std::size_t record_size = 0;
    std::vector<std::size_t> offsets(props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
        offsets[i] = record_size;
        record_size += static_cast<std::size_t>(props[i].byte_size);
    }

    Scene scene;
    scene.primitives.reserve(vertex_count);
    std::vector<char> record(record_size);
    for (std::size_t v = 0; v < vertex_count; ++v) {
        in.read(record.data(), static_cast<std::streamsize>(record_size));
        if (!in) {
            throw std::runtime_error(path + ": truncated vertex data at element " + std::to_string(v));
        }
        auto field = [&](int p) { return read_scalar(record.data() + offsets[p], props[p].byte_size); };

        GaussianPrimitive g;
        g.mean = {field(ix), field(iy), field(iz)};
        for (int c = 0; c < 3; ++c) {
            g.color[c] = std::clamp(0.5 + kShC0 * field(idc[c]), 0.0, 1.0);
        }
        g.opacity = sigmoid(field(iop));
        for (int c = 0; c < 3; ++c) {
            g.scale[c] = std::exp(field(isc[c]));
        }
        g.rot = Eigen::Quaterniond(field(irot[0]), field(irot[1]), field(irot[2]), field(irot[3]));

        const bool finite = g.mean.allFinite() && g.scale.allFinite() && g.color.allFinite() &&
                            std::isfinite(g.opacity) && g.rot.coeffs().allFinite();
        if (!finite) {
            throw std::runtime_error(path + ": non-finite value in element " + std::to_string(v));
        }
        g.rot.normalize();
        scene.primitives.push_back(g);
    }
    return scene;
}

void write_ply(const std::string& path, const Scene& scene) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write PLY file: " + path);
    }
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << scene.primitives.size() << "\n";
    for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
                             "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                             "rot_2", "rot_3"}) {
        out << "property float " << name << "\n";
    }
    out << "end_header\n";

    auto put = [&](double v) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), 4);
    };
    for (const auto& g : scene.primitives) {
        put(g.mean.x());
        put(g.mean.y());
        put(g.mean.z());
        put(0.0);
        put(0.0);
        put(0.0);
        for (int c = 0; c < 3; ++c) {
            put((g.color[c] - 0.5) / kShC0);
        }
        put(logit(g.opacity));
        for (int c = 0; c < 3; ++c) {
            put(std::log(g.scale[c]));
        }
        put(g.rot.w());
        put(g.rot.x());
        put(g.rot.y());
        put(g.rot.z());
    }
    if (!out) {
        throw std::runtime_error("failed writing PLY file: " + path);
    }
}

namespace {

using nlohmann::json;

Eigen::Vector3d vec3_from(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) {
        throw std::runtime_error("scene JSON: " + what + " must be a 3-array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

Scene load_scene_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open scene JSON: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }

    Scene scene;
    if (j.contains("background")) {
        scene.background = vec3_from(j.at("background"), "background");
    }
    if (!j.contains("primitives") || !j.at("primitives").is_array()) {
        throw std::runtime_error(path + ": missing primitives array");
    }
    std::size_t idx = 0;
    for (const auto& jp : j.at("primitives")) {
        GaussianPrimitive g;
        const std::string tag = "primitive " + std::to_string(idx);
        g.mean = vec3_from(jp.at("mean"), tag + " mean");
        const auto& jr = jp.at("rot");
        if (!jr.is_array() || jr.size() != 4) {
            throw std::runtime_error("scene JSON: " + tag + " rot must be [w,x,y,z]");
        }
        g.rot = Eigen::Quaterniond(jr[0].get<double>(), jr[1].get<double>(), jr[2].get<double>(),
                                   jr[3].get<double>());
        g.rot.normalize();
        g.scale = vec3_from(jp.at("scale"), tag + " scale");
        g.opacity = jp.at("opacity").get<double>();
        g.color = vec3_from(jp.at("color"), tag + " color");
        if (!(g.scale.minCoeff() > 0.0)) {
            throw std::runtime_error("scene JSON: " + tag + " scale must be positive");
        }
        if (g.opacity < 0.0 || g.opacity > 1.0 || g.color.minCoeff() < 0.0 || g.color.maxCoeff() > 1.0) {
            throw std::runtime_error("scene JSON: " + tag + " opacity/color out of [0,1]");
        }
        scene.primitives.push_back(g);
        ++idx;
    }
    return scene;
}

void save_scene_json(const std::string& path, const Scene& scene) {
    json j;
    j["background"] = {scene.background.x(), scene.background.y(), scene.background.z()};
    json prims = json::array();
    for (const auto& g : scene.primitives) {
        json jp;
        jp["mean"] = {g.mean.x(), g.mean.y(), g.mean.z()};
        jp["rot"] = {g.rot.w(), g.rot.x(), g.rot.y(), g.rot.z()};
        jp["scale"] = {g.scale.x(), g.scale.y(), g.scale.z()};
        jp["opacity"] = g.opacity;
        jp["color"] = {g.color.x(), g.color.y(), g.color.z()};
        prims.push_back(std::move(jp));
    }
    j["primitives"] = std::move(prims);

    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write scene JSON: " + path);
    }
    out << j.dump(2) << '\n';
}

Scene generate_synthetic(const SyntheticSpec& spec) {
    if (spec.count < 1) {
        throw std::invalid_argument("synthetic scene: count must be >= 1");
    }
    if (!(spec.extent > 0.0)) {
        throw std::invalid_argument("synthetic scene: extent must be positive");
    }
    if (!(spec.scale_range.first > 0.0) || spec.scale_range.second < spec.scale_range.first) {
        throw std::invalid_argument("synthetic scene: scale_range must be positive and ordered");
    }
    if (spec.opacity_range.first < 0.0 || spec.opacity_range.second > 1.0 ||
        spec.opacity_range.second < spec.opacity_range.first) {
        throw std::invalid_argument("synthetic scene: opacity_range must be ordered within [0,1]");
    }

    Rng rng(spec.seed);
    const double half = spec.extent / 2.0;
    const double log_lo = std::log(spec.scale_range.first);
    const double log_hi = std::log(spec.scale_range.second);

    Scene scene;
    scene.primitives.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        GaussianPrimitive g;
        for (int c = 0; c < 3; ++c) {
            g.mean[c] = rng.uniform(-half, half);
        }
        // Shoemake's subgroup method for a uniform random rotation.
        const double u1 = rng.uniform();
        const double u2 = rng.uniform();
        const double u3 = rng.uniform();
        const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
        g.rot = Eigen::Quaterniond(b * std::cos(2.0 * M_PI * u3), a * std::sin(2.0 * M_PI * u2),
                                   a * std::cos(2.0 * M_PI * u2), b * std::sin(2.0 * M_PI * u3));
        g.rot.normalize();
        for (int c = 0; c < 3; ++c) {
            g.scale[c] = std::exp(rng.uniform(log_lo, log_hi));
        }
        g.opacity = rng.uniform(spec.opacity_range.first, spec.opacity_range.second);
        for (int c = 0; c < 3; ++c) {
            g.color[c] = rng.uniform();
        }
        scene.primitives.push_back(g);
    }
    return scene;
}

}  // namespace splatloc

#include "hh/sim/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hh/error.hpp"
#include "hh/sim/material.hpp"

namespace hh::sim {

namespace {

struct Camera {
    double yaw;
    double tilt;  // foreshortening of the scene's depth axis
    double lift;  // image-space rise per metre of height
};

Camera camera_for(ViewId v) {
    switch (v) {
        case ViewId::front: return {0.0, 0.55, 0.8};
        case ViewId::top: return {0.0, 1.0, 0.0};
        case ViewId::side: return {std::numbers::pi / 2, 0.55, 0.8};
    }
    return {0.0, 1.0, 0.0};
}

float quantize(double v) { return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f; }

std::array<double, 3> shaded(const SceneModel& scene, int row, int col) {
    const auto& m = material_by_id(scene.grid(row, col));
    const double shade = 0.75 + 0.25 * std::min(scene.heightmap(row, col) / 0.04, 1.0);
    return {m.color[0] * shade, m.color[1] * shade, m.color[2] * shade};
}

void set_pixel(Raster& r, int y, int x, const std::array<float, 3>& c) {
    if (y < 0 || y >= r.height || x < 0 || x >= r.width) return;
    for (int k = 0; k < 3; ++k) r.at(y, x, k) = c[k];
}

void draw_line(Raster& r, double x0, double y0, double x1, double y1, const std::array<float, 3>& c) {
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)) * 2)));
    for (int i = 0; i <= steps; ++i) {
        const double t = double(i) / steps;
        set_pixel(r, static_cast<int>(std::floor(y0 + t * (y1 - y0))), static_cast<int>(std::floor(x0 + t * (x1 - x0))),
                  c);
    }
}

}  // namespace

const std::string& view_name(ViewId v) {
    static const std::array<std::string, kNumViews> names = {"front", "top", "side"};
    return names[static_cast<int>(v)];
}

ViewId parse_view(const std::string& name) {
    for (ViewId v : {ViewId::front, ViewId::top, ViewId::side})
        if (view_name(v) == name) return v;
    throw ValidationError("unknown view '" + name + "'", "view_id");
}

std::array<double, 2> local_view_center(const SceneModel& scene, const HandPose& pose) {
    for (int h : {kDominantHand, 1 - kDominantHand}) {
        if (!pose.presence[h]) continue;
        int best = kContactKeypoints[0];
        for (int k : kContactKeypoints)
            if (pose.keypoints[h][k][2] < pose.keypoints[h][best][2]) best = k;
        return {pose.keypoints[h][best][0], pose.keypoints[h][best][1]};
    }
    return {scene.width() / 2, scene.depth() / 2};
}

Views render_views(const SceneModel& scene, const HandPose& pose, ViewId view) {
    const Camera cam = camera_for(view);
    const double cx = scene.width() / 2, cy = scene.depth() / 2;
    const double span = std::max(scene.width(), scene.depth()) * 1.15;
    const double c = std::cos(cam.yaw), s = std::sin(cam.yaw);
    const int g = kGlobalViewSize;

    Views out;
    out.global = {g, g, 3, std::vector<float>(static_cast<std::size_t>(g) * g * 3, 0.0f)};
    for (int v = 0; v < g; ++v)
        for (int u = 0; u < g; ++u) {
            // Invert the ground-plane projection at the pixel centre.
            const double xr = ((u + 0.5) - g / 2.0) / g * span;
            const double yr = -((v + 0.5) - g / 2.0) / g * span / cam.tilt;
            const double x = cx + c * xr + s * yr;
            const double y = cy - s * xr + c * yr;
            const auto cell = scene.cell_at(x, y);
            if (!cell) continue;
            const auto col = shaded(scene, cell->row, cell->col);
            for (int k = 0; k < 3; ++k) out.global.at(v, u, k) = quantize(col[k]);
        }
    auto project = [&](const Vec3& p) {
        const double dx = p[0] - cx, dy = p[1] - cy;
        const double xr = c * dx - s * dy;
        const double yr = s * dx + c * dy;
        return std::array<double, 2>{xr / span * g + g / 2.0, (-yr * cam.tilt - p[2] * cam.lift) / span * g + g / 2.0};
    };
    for (int h = 0; h < kHands; ++h) {
        if (!pose.presence[h]) continue;
        const auto& colour = h == kRight ? kRightSkeleton : kLeftSkeleton;
        for (const auto& bone : kBones) {
            const auto a = project(pose.keypoints[h][bone[0]]);
            const auto b = project(pose.keypoints[h][bone[1]]);
            draw_line(out.global, a[0], a[1], b[0], b[1], colour);
        }
    }

    const int l = kLocalViewSize;
    const auto center = local_view_center(scene, pose);
    const double half = std::max(scene.width(), scene.depth()) / 16.0;
    out.local = {l, l, 3, std::vector<float>(static_cast<std::size_t>(l) * l * 3, 0.0f)};
    for (int v = 0; v < l; ++v)
        for (int u = 0; u < l; ++u) {
            const double xr = ((u + 0.5) / l * 2 - 1) * half;
            const double yr = -((v + 0.5) / l * 2 - 1) * half;
            const auto cell = scene.cell_at(center[0] + c * xr + s * yr, center[1] - s * xr + c * yr);
            if (!cell) continue;
            const auto col = shaded(scene, cell->row, cell->col);
            for (int k = 0; k < 3; ++k) out.local.at(v, u, k) = quantize(col[k]);
        }
    return out;
}

std::string encode_raster(const Raster& r) {
    std::string out(r.data.size(), '\0');
    for (std::size_t i = 0; i < r.data.size(); ++i)
        out[i] = static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(r.data[i], 0.0f, 1.0f) * 255.0f)));
    return out;
}

Raster decode_raster(const std::string& bytes, int height, int width, int channels) {
    const std::size_t n = static_cast<std::size_t>(height) * width * channels;
    if (bytes.size() != n) throw ValidationError("raster blob has " + std::to_string(bytes.size()) + " bytes, expected " +
                                                 std::to_string(n));
    Raster r{height, width, channels, std::vector<float>(n)};
    for (std::size_t i = 0; i < n; ++i) r.data[i] = static_cast<unsigned char>(bytes[i]) / 255.0f;
    return r;
}

}  // namespace hh::sim

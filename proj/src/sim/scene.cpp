#include "hh/sim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "hh/error.hpp"
#include "hh/sim/material.hpp"

namespace hh::sim {

namespace {

struct Rect {
    int r0, c0, rows, cols;
};

constexpr int kMinPatch = 3;

}  // namespace

std::optional<Cell> SceneModel::cell_at(double x, double y) const {
    if (!(x >= 0.0 && y >= 0.0)) return std::nullopt;
    const int c = static_cast<int>(std::floor(x / extent));
    const int r = static_cast<int>(std::floor(y / extent));
    if (r >= rows() || c >= cols()) return std::nullopt;
    return Cell{r, c};
}

std::optional<double> SceneModel::surface_height(double x, double y) const {
    auto cell = cell_at(x, y);
    if (!cell) return std::nullopt;
    return heightmap(cell->row, cell->col);
}

std::vector<int> SceneModel::material_ids() const {
    std::set<int> ids(grid.data.begin(), grid.data.end());
    return {ids.begin(), ids.end()};
}

void SceneModel::validate() const {
    if (rows() < 4 || cols() < 4) throw ValidationError("scene grid must be at least 4x4");
    if (heightmap.rows != rows() || heightmap.cols != cols())
        throw ValidationError("scene heightmap does not match grid");
    for (double h : heightmap.data)
        if (!std::isfinite(h) || h < 0.0 || h > 0.5) throw ValidationError("scene height outside [0, 0.5] m");
    for (int id : grid.data) material_by_id(id);
    if (material_ids().size() < 2) throw ValidationError("scene must contain at least 2 materials");
}

SceneModel sample_scene(std::uint64_t seed, int n_materials, const SceneOptions& options) {
    std::vector<int> palette = options.palette;
    if (palette.empty()) {
        palette.resize(material_table().size());
        std::iota(palette.begin(), palette.end(), 0);
    }
    if (n_materials < 2 || n_materials > 13 || n_materials > static_cast<int>(palette.size()))
        throw ConfigError("n_materials must be in [2, 13] and no larger than the palette, got " +
                          std::to_string(n_materials));
    const int max_patches = (options.rows / kMinPatch) * (options.cols / kMinPatch);
    if (n_materials > max_patches) throw ConfigError("scene grid too small for the requested material count");

    std::mt19937_64 rng(seed);
    // Guillotine partition: repeatedly split the largest splittable rectangle.
    const int target = std::min(max_patches, n_materials + 2 + static_cast<int>(rng() % 3));
    std::vector<Rect> rects = {{0, 0, options.rows, options.cols}};
    while (static_cast<int>(rects.size()) < target) {
        std::vector<std::size_t> order(rects.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return rects[a].rows * rects[a].cols > rects[b].rows * rects[b].cols;
        });
        bool split = false;
        for (std::size_t idx : order) {
            Rect r = rects[idx];
            const bool can_h = r.rows >= 2 * kMinPatch;
            const bool can_v = r.cols >= 2 * kMinPatch;
            if (!can_h && !can_v) continue;
            const bool horizontal = can_h && (!can_v || (r.rows > r.cols) || (r.rows == r.cols && rng() % 2 == 0));
            const int span = horizontal ? r.rows : r.cols;
            const int cut = kMinPatch + static_cast<int>(rng() % (span - 2 * kMinPatch + 1));
            Rect a = r, b = r;
            if (horizontal) {
                a.rows = cut;
                b.r0 += cut;
                b.rows -= cut;
            } else {
                a.cols = cut;
                b.c0 += cut;
                b.cols -= cut;
            }
            rects[idx] = a;
            rects.push_back(b);
            split = true;
            break;
        }
        if (!split) break;
    }
    if (static_cast<int>(rects.size()) < n_materials) throw ConfigError("could not partition scene into enough patches");

    std::vector<int> chosen = palette;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(n_materials);
    std::vector<int> assignment(rects.size());
    for (std::size_t i = 0; i < rects.size(); ++i)
        assignment[i] = i < chosen.size() ? chosen[i] : chosen[rng() % chosen.size()];
    std::shuffle(assignment.begin(), assignment.end(), rng);

    SceneModel s;
    s.id = scene_id_for_seed(seed);
    s.rng_seed = seed;
    s.extent = options.extent;
    s.grid = Matrix<int>(options.rows, options.cols);
    s.heightmap = Matrix<double>(options.rows, options.cols);
    std::uniform_int_distribution<int> height_mm(0, 40);
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const double h = height_mm(rng) * 1e-3;
        const auto& r = rects[i];
        for (int y = r.r0; y < r.r0 + r.rows; ++y)
            for (int x = r.c0; x < r.c0 + r.cols; ++x) {
                s.grid(y, x) = assignment[i];
                s.heightmap(y, x) = h;
            }
    }
    s.validate();
    return s;
}

std::string scene_id_for_seed(std::uint64_t seed) { return "scene_" + std::to_string(seed); }

std::uint64_t seed_from_scene_id(const std::string& id) {
    const std::string prefix = "scene_";
    if (id.rfind(prefix, 0) != 0 || id.size() == prefix.size())
        throw ValidationError("malformed scene id '" + id + "'", "scene_id");
    const std::string digits = id.substr(prefix.size());
    if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }) ||
        digits.size() > 20)
        throw ValidationError("malformed scene id '" + id + "'", "scene_id");
    try {
        return std::stoull(digits);
    } catch (const std::exception&) {
        throw ValidationError("malformed scene id '" + id + "'", "scene_id");
    }
}

void to_json(nlohmann::json& j, const SceneModel& s) {
    nlohmann::json grid = nlohmann::json::array(), heights = nlohmann::json::array();
    for (int r = 0; r < s.rows(); ++r) {
        std::vector<int> g(s.grid.row(r).begin(), s.grid.row(r).end());
        std::vector<double> h(s.heightmap.row(r).begin(), s.heightmap.row(r).end());
        grid.push_back(g);
        heights.push_back(h);
    }
    j = {{"id", s.id}, {"grid", grid}, {"heightmap", heights}, {"extent", s.extent}, {"rng_seed", s.rng_seed}};
}

}  // namespace hh::sim

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/matrix.hpp"

namespace hh::sim {

struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
};

/// A tabletop of rectangular material patches. Cell (r, c) covers
/// x in [c, c+1)*extent, y in [r, r+1)*extent; heights in metres.
struct SceneModel {
    std::string id;
    Matrix<int> grid;
    Matrix<double> heightmap;
    double extent = 0.05;
    std::uint64_t rng_seed = 0;

    int rows() const { return grid.rows; }
    int cols() const { return grid.cols; }
    double width() const { return cols() * extent; }
    double depth() const { return rows() * extent; }

    std::optional<Cell> cell_at(double x, double y) const;
    /// Surface height under (x, y), or nullopt outside the grid (no surface there).
    std::optional<double> surface_height(double x, double y) const;
    std::vector<int> material_ids() const;
    void validate() const;
};

struct SceneOptions {
    int rows = 16;
    int cols = 16;
    double extent = 0.05;
    /// Materials to draw from; empty means the full table.
    std::vector<int> palette;
};

/// Deterministic in (seed, n_materials, options). n_materials must be in [2, 13] and no larger
/// than the palette; exactly n_materials distinct ids appear.
SceneModel sample_scene(std::uint64_t seed, int n_materials, const SceneOptions& options = {});

std::string scene_id_for_seed(std::uint64_t seed);
/// Inverse of scene_id_for_seed; throws ValidationError on malformed ids.
std::uint64_t seed_from_scene_id(const std::string& id);

void to_json(nlohmann::json& j, const SceneModel& s);

}  // namespace hh::sim

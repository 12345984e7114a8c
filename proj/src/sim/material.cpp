#include "hh/sim/material.hpp"

#include "hh/error.hpp"

namespace hh::sim {

namespace {

std::vector<Material> build_table() {
    // All mode frequencies stay below 3.8 kHz so the table is valid at 8 kHz.
    std::vector<Material> t = {
        {0, "wood", {{220, 35, 1.0}, {560, 50, 0.6}, {1100, 80, 0.35}, {2100, 120, 0.2}}, -3.0, 0.6, 0.3, {0.55f, 0.35f, 0.15f}},
        {1, "metal", {{520, 4, 1.0}, {1370, 5, 0.8}, {2380, 6, 0.6}, {3400, 8, 0.4}}, 0.0, 0.95, 0.1, {0.6f, 0.62f, 0.68f}},
        {2, "plastic", {{380, 60, 1.0}, {950, 90, 0.5}, {1900, 140, 0.3}}, -2.0, 0.5, 0.4, {0.1f, 0.45f, 0.8f}},
        {3, "fabric", {{150, 300, 0.3}, {400, 400, 0.2}}, -6.0, 0.05, 1.0, {0.7f, 0.15f, 0.2f}},
        {4, "glass", {{900, 8, 1.0}, {2200, 10, 0.7}, {3500, 14, 0.4}}, 1.0, 0.9, 0.15, {0.55f, 0.85f, 0.85f}},
        {5, "ceramic", {{700, 15, 1.0}, {1650, 20, 0.6}, {2900, 30, 0.4}}, 0.0, 0.85, 0.2, {0.85f, 0.8f, 0.65f}},
        {6, "cardboard", {{180, 120, 0.8}, {450, 160, 0.4}, {900, 220, 0.2}}, -3.0, 0.3, 0.7, {0.7f, 0.55f, 0.3f}},
        {7, "stone", {{300, 45, 0.8}, {800, 60, 0.5}, {1800, 90, 0.3}, {3000, 130, 0.2}}, -1.0, 0.85, 0.3, {0.4f, 0.4f, 0.4f}},
        {8, "snow", {{100, 500, 0.2}}, -4.0, 0.02, 1.2, {0.88f, 0.88f, 0.86f}},
        {9, "leather", {{200, 200, 0.4}, {600, 260, 0.2}}, -4.0, 0.2, 0.8, {0.35f, 0.2f, 0.1f}},
        {10, "paper", {{1200, 150, 0.3}, {2600, 200, 0.2}}, 2.0, 0.1, 0.9, {0.85f, 0.85f, 0.55f}},
        {11, "rubber", {{120, 150, 0.6}, {330, 220, 0.3}}, -5.0, 0.15, 0.5, {0.15f, 0.15f, 0.15f}},
        {12, "foliage", {{250, 250, 0.2}, {1500, 300, 0.15}, {3000, 350, 0.1}}, 3.0, 0.05, 1.2, {0.2f, 0.6f, 0.2f}},
    };
    return t;
}

}  // namespace

void Material::validate(int sample_rate) const {
    if (modes.empty() || modes.size() > 8) throw ValidationError("material " + name + " must have 1-8 modes");
    for (const auto& m : modes) {
        if (!(m.frequency > 20.0 && m.frequency < sample_rate / 2.0))
            throw ValidationError("material " + name + " has a mode outside (20, sr/2)");
        if (!(m.damping > 0.0)) throw ValidationError("material " + name + " has non-positive damping");
        if (!(m.gain >= 0.0)) throw ValidationError("material " + name + " has a negative gain");
    }
    if (hardness < 0.0 || hardness > 1.0) throw ValidationError("material " + name + " hardness outside [0, 1]");
}

const std::vector<Material>& material_table() {
    static const std::vector<Material> table = build_table();
    return table;
}

const Material& material_by_id(int id) {
    const auto& t = material_table();
    if (id < 0 || id >= static_cast<int>(t.size())) throw ValidationError("unknown material id " + std::to_string(id));
    return t[id];
}

const Material& material_by_name(const std::string& name) {
    for (const auto& m : material_table())
        if (m.name == name) return m;
    throw ValidationError("unknown material '" + name + "'", "material");
}

void to_json(nlohmann::json& j, const Material& m) {
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& mode : m.modes) modes.push_back({mode.frequency, mode.damping, mode.gain});
    j = {{"id", m.id},
         {"name", m.name},
         {"modes", modes},
         {"noise_color", m.noise_color},
         {"hardness", m.hardness},
         {"contact_noise_gain", m.contact_noise_gain},
         {"color", m.color}};
}

}  // namespace hh::sim

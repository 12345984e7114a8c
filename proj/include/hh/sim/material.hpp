#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hh::sim {

struct Mode {
    double frequency = 0.0;  // Hz
    double damping = 0.0;    // 1/s
    double gain = 0.0;
};

struct Material {
    int id = 0;
    std::string name;
    std::vector<Mode> modes;
    double noise_color = 0.0;  // spectral tilt, dB/octave
    double hardness = 0.5;     // [0, 1]
    double contact_noise_gain = 0.0;
    std::array<float, 3> color{};  // raster colour, each channel < 0.9 so skeleton colours stay unique

    /// Throws ValidationError if an invariant fails for the given sample rate.
    void validate(int sample_rate) const;
};

/// The 13 shipped materials, indexed by id.
const std::vector<Material>& material_table();
const Material& material_by_id(int id);
/// Throws ValidationError for unknown names.
const Material& material_by_name(const std::string& name);

void to_json(nlohmann::json& j, const Material& m);

}  // namespace hh::sim

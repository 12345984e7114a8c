#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/dsp/types.hpp"
#include "hh/sim/contacts.hpp"
#include "hh/sim/hand.hpp"
#include "hh/sim/render.hpp"
#include "hh/sim/scene.hpp"
#include "hh/sim/synth.hpp"

namespace hh::sim {

inline constexpr double kViewRate = 4.0;

struct DatasetConfig {
    int n_scenes = 10;
    int clips_per_scene = 60;
    double clip_duration = 2.0;
    dsp::DspConfig dsp = dsp::DspConfig::desk();
    std::uint64_t seed = 0;
    /// Emit every training clip under all three views (validation/test stay front-only).
    bool augment_views = true;
    std::vector<std::string> materials = {"wood", "metal", "fabric", "glass"};
    std::vector<std::string> gestures = {"tap", "scratch", "pat"};
    int materials_per_scene = 4;
    double view_rate = kViewRate;
    double synth_gain = 0.4;
    double noise_bed = 0.005;
    int grid_rows = 16;
    int grid_cols = 16;
    double cell_extent = 0.05;

    /// 10 scenes x 60 clips of 2 s at 8 kHz; 4 materials, 3 gestures.
    static DatasetConfig desk();
    /// 24 scenes, 8 s clips at 16 kHz, all 13 materials and 7 gestures.
    static DatasetConfig reference();

    void validate() const;
    std::string hash() const;
    SceneOptions scene_options() const;
    std::vector<int> material_ids() const;

    bool operator==(const DatasetConfig&) const = default;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);
/// Schema-checked: every unknown or invalid field is listed in one ConfigError.
void from_json(const nlohmann::json& j, DatasetConfig& c);

/// One generated interaction before it is written out.
struct Clip {
    HandTrajectory trajectory;
    std::vector<ContactEvent> events;
    SynthResult sound;
    std::string action_label;
    std::string material_label;
    std::uint64_t trajectory_seed = 0;
    std::uint64_t sound_seed = 0;
};

/// Samples trajectories (retrying with derived seeds) until the dominant event has the gesture's
/// expected kind, then synthesizes the sound.
Clip generate_clip(const DatasetConfig& cfg, const SceneModel& scene, Gesture gesture, std::uint64_t seed);

SceneModel scene_for(const DatasetConfig& cfg, std::uint64_t scene_seed);

int n_view_frames(double duration, double view_rate);
/// Trajectory frame shown at each view frame k (time k / view_rate), round-half-up, clamped.
std::vector<int> view_pose_indices(int n_traj_frames, double view_rate);
/// Views for every view frame of a trajectory.
std::vector<Views> render_clip_views(const SceneModel& scene, const HandTrajectory& traj, ViewId view, double view_rate);

struct ManifestEntry {
    std::string clip_id;
    std::string scene_id;
    std::uint64_t scene_seed = 0;
    std::uint64_t trajectory_seed = 0;
    std::uint64_t sound_seed = 0;
    std::string split;
    std::string view_id;
    std::string action_label;
    std::string material_label;
    std::string wav;
    std::string trajectory;
    std::string views;
    double duration = 0.0;
    int n_view_frames = 0;
    std::vector<ContactEvent> events;
};

void to_json(nlohmann::json& j, const ManifestEntry& e);
void from_json(const nlohmann::json& j, ManifestEntry& e);

struct DatasetManifest {
    std::filesystem::path root;
    DatasetConfig config;
    float mel_min = 0.0f;
    float mel_max = 0.0f;
    std::vector<ManifestEntry> entries;

    std::vector<const ManifestEntry*> split(const std::string& name, bool front_only = false) const;
    std::vector<std::string> scene_ids(const std::string& split) const;
    /// Reads manifest.jsonl and meta.json from `dir`.
    static DatasetManifest load(const std::filesystem::path& dir);
};

/// Writes clips/, trajectories/, views/, manifest.jsonl and meta.json under `out`.
/// Scenes are split 80/10/10 into train/val/test.
DatasetManifest generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& out);

dsp::Waveform load_clip_audio(const DatasetManifest& m, const ManifestEntry& e);
HandTrajectory load_clip_trajectory(const DatasetManifest& m, const ManifestEntry& e);
std::vector<Views> load_clip_views(const DatasetManifest& m, const ManifestEntry& e);

}  // namespace hh::sim

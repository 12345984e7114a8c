#include "hh/sim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "hh/dsp/audio_io.hpp"
#include "hh/dsp/mel.hpp"
#include "hh/error.hpp"
#include "hh/schema.hpp"
#include "hh/util.hpp"

namespace hh::sim {

namespace {

constexpr int kClipAttempts = 64;

std::vector<std::string> all_material_names() {
    std::vector<std::string> out;
    for (const auto& m : material_table()) out.push_back(m.name);
    return out;
}

std::vector<std::string> all_gesture_names() {
    std::vector<std::string> out;
    for (Gesture g : all_gestures()) out.push_back(gesture_name(g));
    return out;
}

std::string clip_name(const std::string& scene_id, int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_c%03d", k);
    return scene_id + buf;
}

}  // namespace

DatasetConfig DatasetConfig::desk() { return DatasetConfig{}; }

DatasetConfig DatasetConfig::reference() {
    DatasetConfig c;
    c.n_scenes = 24;
    c.clips_per_scene = 175;
    c.clip_duration = 8.0;
    c.dsp = dsp::DspConfig::reference();
    c.materials = all_material_names();
    c.gestures = all_gesture_names();
    c.materials_per_scene = 6;
    return c;
}

void DatasetConfig::validate() const {
    nlohmann::json j = *this;
    DatasetConfig tmp;
    from_json(j, tmp);
}

std::string DatasetConfig::hash() const {
    nlohmann::json j = *this;
    return hex64(fnv1a(j.dump()));
}

SceneOptions DatasetConfig::scene_options() const {
    return {grid_rows, grid_cols, cell_extent, material_ids()};
}

std::vector<int> DatasetConfig::material_ids() const {
    std::vector<int> ids;
    for (const auto& name : materials) ids.push_back(material_by_name(name).id);
    return ids;
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
    j = {{"n_scenes", c.n_scenes},
         {"clips_per_scene", c.clips_per_scene},
         {"clip_duration", c.clip_duration},
         {"dsp", c.dsp},
         {"seed", c.seed},
         {"augment_views", c.augment_views},
         {"materials", c.materials},
         {"gestures", c.gestures},
         {"materials_per_scene", c.materials_per_scene},
         {"view_rate", c.view_rate},
         {"synth_gain", c.synth_gain},
         {"noise_bed", c.noise_bed},
         {"grid_rows", c.grid_rows},
         {"grid_cols", c.grid_cols},
         {"cell_extent", c.cell_extent}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
    DatasetConfig out;
    SchemaReader r(j);
    r.integer("n_scenes", out.n_scenes, 3, 10000);
    r.integer("clips_per_scene", out.clips_per_scene, 1, 100000);
    r.number("clip_duration", out.clip_duration, 0.0, kMaxDuration, true);
    if (auto* d = r.object("dsp")) {
        d->integer("sample_rate", out.dsp.sample_rate, 1000, 192000);
        d->integer("n_fft", out.dsp.n_fft, 16, 65536);
        d->integer("hop", out.dsp.hop, 1, 65536);
        d->integer("win", out.dsp.win, 1, 65536);
        d->integer("n_mels", out.dsp.n_mels, 1, 512);
        d->number("f_min", out.dsp.f_min, 0.0, 1e6);
        d->number("f_max", out.dsp.f_max, 0.0, 1e6, true);
        d->number("log_floor", out.dsp.log_floor, 0.0, 1.0, true);
    }
    r.uint64("seed", out.seed);
    r.boolean("augment_views", out.augment_views);
    r.string_list("materials", out.materials, all_material_names(), true, 2);
    r.string_list("gestures", out.gestures, all_gesture_names(), true, 1);
    r.integer("materials_per_scene", out.materials_per_scene, 2, 13);
    r.number("view_rate", out.view_rate, 0.0, 30.0, true);
    r.number("synth_gain", out.synth_gain, 0.0, 10.0, true);
    r.number("noise_bed", out.noise_bed, 0.0, 0.1);
    r.integer("grid_rows", out.grid_rows, 6, 256);
    r.integer("grid_cols", out.grid_cols, 6, 256);
    r.number("cell_extent", out.cell_extent, 0.0, 1.0, true);
    if (r.ok()) {
        if (out.materials_per_scene > static_cast<int>(out.materials.size()))
            r.error("materials_per_scene", "exceeds the number of listed materials");
        try {
            out.dsp.validate();
        } catch (const ConfigError& e) {
            r.error("dsp", e.what());
        }
        for (const auto& name : out.materials)
            for (const auto& mode : material_by_name(name).modes)
                if (mode.frequency >= out.dsp.sample_rate / 2.0)
                    r.error("materials", "material " + name + " has modes above the Nyquist frequency");
        const double samples = out.clip_duration * out.dsp.sample_rate;
        if (std::abs(samples - std::round(samples)) > 1e-9)
            r.error("clip_duration", "must be a whole number of samples");
        const double frames = out.clip_duration * kTrajectoryRate;
        if (std::abs(frames - std::round(frames)) > 1e-9)
            r.error("clip_duration", "must be a whole number of 30 Hz frames");
    }
    r.finish();
    c = std::move(out);
}

SceneModel scene_for(const DatasetConfig& cfg, std::uint64_t scene_seed) {
    return sample_scene(scene_seed, cfg.materials_per_scene, cfg.scene_options());
}

Clip generate_clip(const DatasetConfig& cfg, const SceneModel& scene, Gesture gesture, std::uint64_t seed) {
    const ContactKind want = expected_kind(gesture);
    for (int attempt = 0; attempt < kClipAttempts; ++attempt) {
        Clip c;
        c.trajectory_seed = derive_seed(seed, attempt);
        c.trajectory = sample_trajectory(scene, gesture, c.trajectory_seed, cfg.clip_duration);
        c.events = detect_contacts(scene, c.trajectory);
        if (c.events.empty()) continue;
        c.sound_seed = derive_seed(c.trajectory_seed, 0x50d);
        c.sound = synthesize(c.events, material_by_id, cfg.dsp.sample_rate, cfg.clip_duration, c.sound_seed,
                             {cfg.synth_gain, cfg.noise_bed});
        const auto& dom = c.events[dominant_event(c.sound)];
        if (dom.kind != want) continue;
        c.action_label = gesture_name(gesture);
        c.material_label = material_by_id(dom.material_id).name;
        return c;
    }
    throw ValidationError("could not realise gesture " + gesture_name(gesture) + " on " + scene.id);
}

int n_view_frames(double duration, double view_rate) {
    return std::max(1, static_cast<int>(std::floor(duration * view_rate + 1e-9)));
}

std::vector<int> view_pose_indices(int n_traj_frames, double view_rate) {
    const int n = n_view_frames(n_traj_frames / kTrajectoryRate, view_rate);
    std::vector<int> idx(n);
    for (int k = 0; k < n; ++k)
        idx[k] = static_cast<int>(std::clamp<long>(round_half_up(k * kTrajectoryRate / view_rate), 0, n_traj_frames - 1));
    return idx;
}

std::vector<Views> render_clip_views(const SceneModel& scene, const HandTrajectory& traj, ViewId view, double view_rate) {
    std::vector<Views> out;
    for (int f : view_pose_indices(traj.n_frames(), view_rate)) out.push_back(render_views(scene, traj.poses[f], view));
    return out;
}

void to_json(nlohmann::json& j, const ManifestEntry& e) {
    j = {{"clip_id", e.clip_id},
         {"scene_id", e.scene_id},
         {"scene_seed", e.scene_seed},
         {"trajectory_seed", e.trajectory_seed},
         {"sound_seed", e.sound_seed},
         {"split", e.split},
         {"view_id", e.view_id},
         {"action_label", e.action_label},
         {"material_label", e.material_label},
         {"wav", e.wav},
         {"trajectory", e.trajectory},
         {"views", e.views},
         {"duration", e.duration},
         {"n_view_frames", e.n_view_frames},
         {"events", e.events}};
}

void from_json(const nlohmann::json& j, ManifestEntry& e) {
    j.at("clip_id").get_to(e.clip_id);
    j.at("scene_id").get_to(e.scene_id);
    j.at("scene_seed").get_to(e.scene_seed);
    j.at("trajectory_seed").get_to(e.trajectory_seed);
    j.at("sound_seed").get_to(e.sound_seed);
    j.at("split").get_to(e.split);
    j.at("view_id").get_to(e.view_id);
    j.at("action_label").get_to(e.action_label);
    j.at("material_label").get_to(e.material_label);
    j.at("wav").get_to(e.wav);
    j.at("trajectory").get_to(e.trajectory);
    j.at("views").get_to(e.views);
    j.at("duration").get_to(e.duration);
    j.at("n_view_frames").get_to(e.n_view_frames);
    j.at("events").get_to(e.events);
}

std::vector<const ManifestEntry*> DatasetManifest::split(const std::string& name, bool front_only) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.split == name && (!front_only || e.view_id == "front")) out.push_back(&e);
    return out;
}

std::vector<std::string> DatasetManifest::scene_ids(const std::string& split_name) const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.split == split_name && std::find(out.begin(), out.end(), e.scene_id) == out.end())
            out.push_back(e.scene_id);
    return out;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& dir) {
    DatasetManifest m;
    m.root = dir;
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(dir / "meta.json"));
        m.config = meta.at("config").get<DatasetConfig>();
        m.mel_min = meta.at("mel_min").get<float>();
        m.mel_max = meta.at("mel_max").get<float>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError((dir / "meta.json").string() + ": " + e.what());
    }
    std::istringstream lines(read_file(dir / "manifest.jsonl"));
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            m.entries.push_back(nlohmann::json::parse(line).get<ManifestEntry>());
        } catch (const nlohmann::json::exception& e) {
            throw IoError((dir / "manifest.jsonl").string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return m;
}

DatasetManifest generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    std::error_code ec;
    for (const char* sub : {"clips", "trajectories", "views"}) {
        std::filesystem::create_directories(out / sub, ec);
        if (ec) throw IoError("cannot create " + (out / sub).string() + ": " + ec.message());
    }

    // Disjoint scene split.
    std::vector<int> order(cfg.n_scenes);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x5b1));
    std::shuffle(order.begin(), order.end(), rng);
    const int n_test = std::max(1, static_cast<int>(round_half_up(0.1 * cfg.n_scenes)));
    const int n_val = std::max(1, static_cast<int>(round_half_up(0.1 * cfg.n_scenes)));
    std::vector<std::string> split_of(cfg.n_scenes, "train");
    for (int i = 0; i < n_test; ++i) split_of[order[i]] = "test";
    for (int i = n_test; i < n_test + n_val; ++i) split_of[order[i]] = "val";

    std::vector<Gesture> gestures;
    for (const auto& g : cfg.gestures) gestures.push_back(parse_gesture(g));

    DatasetManifest manifest;
    manifest.root = out;
    manifest.config = cfg;
    const auto fb_cfg = cfg.dsp;
    float mel_min = std::numeric_limits<float>::infinity();
    float mel_max = -std::numeric_limits<float>::infinity();
    std::string manifest_text;

    for (int s = 0; s < cfg.n_scenes; ++s) {
        const std::uint64_t scene_seed = cfg.seed * 1000 + s;
        const SceneModel scene = scene_for(cfg, scene_seed);
        const std::string& split = split_of[s];
        for (int k = 0; k < cfg.clips_per_scene; ++k) {
            const Gesture g = gestures[k % gestures.size()];
            const Clip clip = generate_clip(cfg, scene, g, derive_seed(scene_seed, 0xc11b0000ULL + k));
            ManifestEntry base;
            base.clip_id = clip_name(scene.id, k);
            base.scene_id = scene.id;
            base.scene_seed = scene_seed;
            base.trajectory_seed = clip.trajectory_seed;
            base.sound_seed = clip.sound_seed;
            base.split = split;
            base.action_label = clip.action_label;
            base.material_label = clip.material_label;
            base.wav = "clips/" + base.clip_id + ".wav";
            base.trajectory = "trajectories/" + base.clip_id + ".json";
            base.duration = clip.trajectory.duration();
            base.n_view_frames = n_view_frames(base.duration, cfg.view_rate);
            base.events = clip.events;

            dsp::write_wav(out / base.wav, clip.sound.waveform);
            write_file_atomic(out / base.trajectory, nlohmann::json(clip.trajectory).dump());
            if (split == "train") {
                const auto mel = dsp::waveform_to_mel(clip.sound.waveform, fb_cfg);
                for (float v : mel.frames.data) {
                    mel_min = std::min(mel_min, v);
                    mel_max = std::max(mel_max, v);
                }
            }

            std::vector<ViewId> views = {ViewId::front};
            if (split == "train" && cfg.augment_views) views = {ViewId::front, ViewId::top, ViewId::side};
            for (ViewId v : views) {
                ManifestEntry e = base;
                e.view_id = view_name(v);
                e.views = "views/" + base.clip_id + "_" + e.view_id + ".bin";
                std::string blob;
                for (const auto& vw : render_clip_views(scene, clip.trajectory, v, cfg.view_rate))
                    blob += encode_raster(vw.global) + encode_raster(vw.local);
                write_file_atomic(out / e.views, blob);
                manifest_text += nlohmann::json(e).dump() + "\n";
                manifest.entries.push_back(std::move(e));
            }
        }
    }
    manifest.mel_min = mel_min;
    manifest.mel_max = mel_max;

    nlohmann::json materials = nlohmann::json::array();
    for (int id : cfg.material_ids()) materials.push_back(material_by_id(id));
    nlohmann::json templates = nlohmann::json::object();
    for (HandShape sh : {HandShape::flat, HandShape::point, HandShape::knuckle})
        templates[shape_name(sh)] = {{"anchor", anchor_keypoint(sh)}, {"offsets", hand_template(sh)}};
    const nlohmann::json meta = {{"config", cfg},
                                 {"config_hash", cfg.hash()},
                                 {"dsp_fingerprint", cfg.dsp.fingerprint()},
                                 {"mel_min", mel_min},
                                 {"mel_max", mel_max},
                                 {"materials", materials},
                                 {"hand_templates", templates},
                                 {"contact_keypoints", kContactKeypoints},
                                 {"bones", kBones},
                                 {"scene_seeds", [&] {
                                      std::vector<std::uint64_t> seeds;
                                      for (int s = 0; s < cfg.n_scenes; ++s) seeds.push_back(cfg.seed * 1000 + s);
                                      return seeds;
                                  }()}};
    write_file_atomic(out / "meta.json", meta.dump(2));
    write_file_atomic(out / "manifest.jsonl", manifest_text);
    return manifest;
}

dsp::Waveform load_clip_audio(const DatasetManifest& m, const ManifestEntry& e) { return dsp::read_wav(m.root / e.wav); }

HandTrajectory load_clip_trajectory(const DatasetManifest& m, const ManifestEntry& e) {
    try {
        return nlohmann::json::parse(read_file(m.root / e.trajectory)).get<HandTrajectory>();
    } catch (const nlohmann::json::exception& ex) {
        throw IoError((m.root / e.trajectory).string() + ": " + ex.what());
    }
}

std::vector<Views> load_clip_views(const DatasetManifest& m, const ManifestEntry& e) {
    const std::string blob = read_file(m.root / e.views);
    const std::size_t g = std::size_t(kGlobalViewSize) * kGlobalViewSize * 3;
    const std::size_t l = std::size_t(kLocalViewSize) * kLocalViewSize * 3;
    if (blob.size() != (g + l) * e.n_view_frames)
        throw IoError((m.root / e.views).string() + ": unexpected raster blob size");
    std::vector<Views> out;
    for (int k = 0; k < e.n_view_frames; ++k) {
        const std::size_t off = k * (g + l);
        out.push_back({decode_raster(blob.substr(off, g), kGlobalViewSize, kGlobalViewSize),
                       decode_raster(blob.substr(off + g, l), kLocalViewSize, kLocalViewSize)});
    }
    return out;
}

}  // namespace hh::sim

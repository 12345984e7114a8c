#include "hh/sim/hand.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hh/error.hpp"

namespace hh::sim {

const std::array<std::array<int, 2>, 20> kBones = {{{0, 1},  {1, 2},   {2, 3},   {3, 4},   {0, 5},
                                                     {5, 6},  {6, 7},   {7, 8},   {0, 9},   {9, 10},
                                                     {10, 11}, {11, 12}, {0, 13}, {13, 14}, {14, 15},
                                                     {15, 16}, {0, 17}, {17, 18}, {18, 19}, {19, 20}}};

namespace {

using Template = std::array<Vec3, kKeypoints>;

Template anchored(Template t, int anchor) {
    const Vec3 a = t[anchor];
    for (auto& p : t)
        for (int d = 0; d < 3; ++d) p[d] -= a[d];
    return t;
}

// Right-hand keypoints relative to the wrist, before anchoring.
const Template kFlatRaw = {{{0, 0, 0},
                            {0.025, 0.02, 0.008},
                            {0.045, 0.04, 0.008},
                            {0.06, 0.06, 0.008},
                            {0.07, 0.08, 0},
                            {0.03, 0.09, 0},
                            {0.032, 0.125, 0.008},
                            {0.033, 0.15, 0.008},
                            {0.034, 0.17, 0},
                            {0.01, 0.095, 0},
                            {0.01, 0.135, 0.008},
                            {0.01, 0.16, 0.008},
                            {0.01, 0.185, 0},
                            {-0.01, 0.09, 0},
                            {-0.012, 0.125, 0.008},
                            {-0.013, 0.15, 0.008},
                            {-0.014, 0.17, 0},
                            {-0.03, 0.08, 0},
                            {-0.035, 0.105, 0.008},
                            {-0.037, 0.12, 0.008},
                            {-0.038, 0.135, 0}}};

const Template kPointRaw = {{{0, 0, 0.09},
                             {0.025, 0.02, 0.085},
                             {0.045, 0.04, 0.075},
                             {0.055, 0.06, 0.06},
                             {0.055, 0.075, 0.05},
                             {0.03, 0.09, 0.075},
                             {0.032, 0.12, 0.05},
                             {0.033, 0.135, 0.025},
                             {0.034, 0.145, 0},
                             {0.01, 0.095, 0.075},
                             {0.01, 0.12, 0.06},
                             {0.01, 0.115, 0.045},
                             {0.01, 0.1, 0.04},
                             {-0.01, 0.09, 0.075},
                             {-0.012, 0.112, 0.06},
                             {-0.013, 0.108, 0.047},
                             {-0.013, 0.095, 0.042},
                             {-0.03, 0.08, 0.075},
                             {-0.035, 0.1, 0.062},
                             {-0.037, 0.097, 0.052},
                             {-0.036, 0.087, 0.048}}};

const Template kKnuckleRaw = {{{0, 0, 0.05},
                               {0.025, 0.02, 0.045},
                               {0.045, 0.04, 0.035},
                               {0.05, 0.06, 0.03},
                               {0.04, 0.075, 0.025},
                               {0.03, 0.09, 0.004},
                               {0.032, 0.1, 0.03},
                               {0.03, 0.085, 0.045},
                               {0.03, 0.075, 0.035},
                               {0.01, 0.095, 0},
                               {0.01, 0.105, 0.03},
                               {0.01, 0.09, 0.045},
                               {0.01, 0.078, 0.035},
                               {-0.01, 0.09, 0.004},
                               {-0.011, 0.1, 0.03},
                               {-0.011, 0.086, 0.045},
                               {-0.011, 0.076, 0.036},
                               {-0.03, 0.08, 0.01},
                               {-0.032, 0.09, 0.034},
                               {-0.032, 0.078, 0.046},
                               {-0.032, 0.07, 0.04}}};

struct GestureSpec {
    HandShape shape;
    int min_count, max_count;
    int min_frames, max_frames;  // contact frames per stroke
    int min_gap;                 // non-contact frames between strokes
    double min_normal, max_normal;
    double min_tangential, max_tangential;  // 0 = no sliding
    double min_amplitude, max_amplitude;
};

GestureSpec spec_for(Gesture g) {
    switch (g) {
        case Gesture::tap: return {HandShape::point, 1, 3, 1, 2, 8, 0.2, 0.8, 0, 0, 0, 0};
        case Gesture::knock: return {HandShape::knuckle, 2, 3, 1, 1, 6, 0.4, 0.9, 0, 0, 0, 0};
        case Gesture::drum: return {HandShape::point, 4, 6, 1, 1, 5, 0.2, 0.6, 0, 0, 0, 0};
        case Gesture::slap: return {HandShape::flat, 1, 2, 1, 2, 8, 0.6, 1.0, 0, 0, 0, 0};
        case Gesture::pat: return {HandShape::flat, 1, 3, 3, 6, 8, 0.3, 0.7, 0, 0, 0, 0};
        case Gesture::scratch: return {HandShape::point, 1, 2, 12, 30, 8, 0.2, 0.5, 0.06, 0.2, 0.015, 0.03};
        case Gesture::rub: return {HandShape::flat, 1, 1, 15, 30, 8, 0.2, 0.5, 0.08, 0.2, 0.02, 0.04};
    }
    throw ValidationError("unknown gesture", "gesture");
}

Vec3 place(const Vec3& offset, double yaw, const Vec3& anchor, bool mirror) {
    const double ox = mirror ? -offset[0] : offset[0];
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {anchor[0] + c * ox - s * offset[1], anchor[1] + s * ox + c * offset[1], anchor[2] + offset[2]};
}

/// Offset along the sliding axis after travelling `dist` metres on a triangle path in [-a, a].
double triangle_offset(double dist, double a) {
    if (a <= 0) return 0.0;
    const double m = std::fmod(dist, 4 * a);
    return m < 2 * a ? -a + m : 3 * a - m;
}

struct Placement {
    double x, y, yaw;
    double dir_x, dir_y;
    double surface;
};

constexpr double kPenetration = 0.001;
constexpr double kClearance = 0.005;

/// A placement is accepted when every designed contact keypoint lies on the anchor's patch at
/// the same height over the whole slide, and every other contact-eligible keypoint clears its surface.
bool placement_ok(const SceneModel& scene, HandShape shape, const Placement& p, double amplitude) {
    const auto& tpl = hand_template(shape);
    const auto anchor_cell = scene.cell_at(p.x, p.y);
    if (!anchor_cell) return false;
    const int material = scene.grid(anchor_cell->row, anchor_cell->col);
    const double h = scene.heightmap(anchor_cell->row, anchor_cell->col);
    const int steps = amplitude > 0 ? 8 : 0;
    for (int i = 0; i <= steps; ++i) {
        const double off = steps ? -amplitude + 2 * amplitude * i / steps : 0.0;
        const Vec3 a = {p.x + p.dir_x * off, p.y + p.dir_y * off, h - kPenetration};
        for (int k : kContactKeypoints) {
            const Vec3 q = place(tpl[k], p.yaw, a, false);
            const auto cell = scene.cell_at(q[0], q[1]);
            const bool designed = tpl[k][2] == 0.0;
            if (designed) {
                if (!cell || scene.grid(cell->row, cell->col) != material || scene.heightmap(cell->row, cell->col) != h)
                    return false;
            } else if (cell && q[2] < scene.heightmap(cell->row, cell->col) + kClearance) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

const std::array<Vec3, kKeypoints>& hand_template(HandShape shape) {
    static const Template flat = anchored(kFlatRaw, 9);
    static const Template point = anchored(kPointRaw, 8);
    static const Template knuckle = anchored(kKnuckleRaw, 9);
    switch (shape) {
        case HandShape::flat: return flat;
        case HandShape::point: return point;
        case HandShape::knuckle: return knuckle;
    }
    return flat;
}

int anchor_keypoint(HandShape shape) { return shape == HandShape::point ? 8 : 9; }

std::string shape_name(HandShape shape) {
    switch (shape) {
        case HandShape::flat: return "flat";
        case HandShape::point: return "point";
        case HandShape::knuckle: return "knuckle";
    }
    return "flat";
}

const std::string& gesture_name(Gesture g) {
    static const std::array<std::string, kNumGestures> names = {"tap", "knock", "scratch", "pat", "slap", "rub", "drum"};
    return names[static_cast<int>(g)];
}

Gesture parse_gesture(const std::string& name) {
    for (Gesture g : all_gestures())
        if (gesture_name(g) == name) return g;
    throw ValidationError("unknown gesture '" + name + "'", "gesture");
}

const std::array<Gesture, kNumGestures>& all_gestures() {
    static const std::array<Gesture, kNumGestures> g = {Gesture::tap, Gesture::knock, Gesture::scratch, Gesture::pat,
                                                        Gesture::slap, Gesture::rub, Gesture::drum};
    return g;
}

void HandTrajectory::validate() const {
    if (poses.empty()) throw ValidationError("trajectory has no frames", "frames");
    const int max_frames = static_cast<int>(std::lround(kMaxDuration * kTrajectoryRate));
    if (n_frames() > max_frames)
        throw ValidationError("trajectory longer than " + std::to_string(max_frames) + " frames", "frames");
    for (int f = 0; f < n_frames(); ++f)
        for (int h = 0; h < kHands; ++h)
            for (int k = 0; k < kKeypoints; ++k)
                for (int d = 0; d < 3; ++d) {
                    const double v = poses[f].keypoints[h][k][d];
                    const std::string field =
                        "frames[" + std::to_string(f) + "][" + std::to_string(h) + "][" + std::to_string(k) + "]";
                    if (!std::isfinite(v)) throw ValidationError("non-finite keypoint coordinate", field);
                    if (!poses[f].presence[h] && v != 0.0)
                        throw ValidationError("absent hand must have all-zero keypoints", field);
                }
    for (int f = 1; f < n_frames(); ++f)
        for (int h = 0; h < kHands; ++h) {
            if (!poses[f].presence[h] || !poses[f - 1].presence[h]) continue;
            for (int k : kFingertips) {
                const auto& a = poses[f - 1].keypoints[h][k];
                const auto& b = poses[f].keypoints[h][k];
                const double speed =
                    std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])) *
                    kTrajectoryRate;
                if (speed >= kMaxFingertipSpeed)
                    throw ValidationError("fingertip speed exceeds 5 m/s",
                                          "frames[" + std::to_string(f) + "][" + std::to_string(h) + "][" +
                                              std::to_string(k) + "]");
            }
        }
}

void HandTrajectory::validate(const SceneModel& scene) const {
    validate();
    const double zmax = *std::max_element(scene.heightmap.data.begin(), scene.heightmap.data.end());
    for (int f = 0; f < n_frames(); ++f)
        for (int h = 0; h < kHands; ++h) {
            if (!poses[f].presence[h]) continue;
            for (int k = 0; k < kKeypoints; ++k) {
                const auto& p = poses[f].keypoints[h][k];
                if (p[0] < -1.0 || p[0] > scene.width() + 1.0 || p[1] < -1.0 || p[1] > scene.depth() + 1.0 ||
                    p[2] < -1.0 || p[2] > zmax + 1.0)
                    throw ValidationError("keypoint outside the scene volume",
                                          "frames[" + std::to_string(f) + "][" + std::to_string(h) + "][" +
                                              std::to_string(k) + "]");
            }
        }
}

HandTrajectory sample_trajectory(const SceneModel& scene, Gesture gesture, std::uint64_t seed, double duration) {
    const GestureSpec spec = spec_for(gesture);
    const int n = static_cast<int>(std::lround(duration * kTrajectoryRate));
    if (n < 1 || duration > kMaxDuration) throw ValidationError("trajectory duration must be in (0, 8] s", "duration");
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    // Stroke timing.
    constexpr int kLead = 6, kTail = 4;
    int count = pick(spec.min_count, spec.max_count);
    std::vector<int> lengths;
    int slack = -1;
    while (count > 0) {
        lengths.clear();
        for (int i = 0; i < count; ++i) lengths.push_back(pick(spec.min_frames, spec.max_frames));
        int used = 0;
        for (int l : lengths) used += l;
        slack = n - kLead - kTail - used - (count - 1) * spec.min_gap;
        if (slack >= 0) break;
        --count;
    }
    std::vector<int> starts;
    if (count > 0) {
        std::vector<double> w(count + 1);
        double wsum = 0;
        for (auto& v : w) wsum += (v = uni(0.05, 1.0));
        int cursor = kLead;
        for (int i = 0; i < count; ++i) {
            cursor += static_cast<int>(std::floor(slack * w[i] / wsum));
            starts.push_back(cursor);
            cursor += lengths[i] + spec.min_gap;
        }
    }

    // Placement on a patch.
    const double amplitude = spec.max_tangential > 0 ? uni(spec.min_amplitude, spec.max_amplitude) : 0.0;
    Placement p{};
    bool found = false;
    for (int attempt = 0; attempt < 4000 && !found; ++attempt) {
        const double dir = uni(0, 2 * std::numbers::pi);
        p = {uni(0, scene.width()), uni(0, scene.depth()), uni(0, 2 * std::numbers::pi), std::cos(dir), std::sin(dir), 0};
        found = placement_ok(scene, spec.shape, p, amplitude);
    }
    if (!found) {
        // Fall back to a patch centre with a relaxed check on the anchor only.
        p.x = (scene.cols() / 2 + 0.5) * scene.extent;
        p.y = (scene.rows() / 2 + 0.5) * scene.extent;
    }
    p.surface = *scene.surface_height(p.x, p.y);

    const double hover = uni(0.06, 0.10);
    const double tangential = spec.max_tangential > 0 ? uni(spec.min_tangential, spec.max_tangential) : 0.0;
    std::vector<double> v_down(count), v_up(count);
    for (int i = 0; i < count; ++i) {
        v_down[i] = uni(spec.min_normal, spec.max_normal);
        v_up[i] = uni(0.3, 0.6);
    }

    // Left hand hovers well above the tallest patch, drifting slowly.
    const bool left_present = uni(0, 1) < 0.5;
    const double zmax = *std::max_element(scene.heightmap.data.begin(), scene.heightmap.data.end());
    const Vec3 left_base = {uni(0, scene.width()), uni(0, scene.depth()), zmax + uni(0.1, 0.15)};
    const double left_yaw = uni(0, 2 * std::numbers::pi);
    const double left_phase = uni(0, 2 * std::numbers::pi);

    const auto& tpl = hand_template(spec.shape);
    const auto& flat = hand_template(HandShape::flat);
    HandTrajectory traj;
    traj.poses.resize(n);
    for (int f = 0; f < n; ++f) {
        double lift = hover + kPenetration;
        // The hand slides only while in contact and holds its slide position in between.
        int slid = 0;
        for (int i = 0; i < count; ++i) {
            const int s = starts[i], e = starts[i] + lengths[i] - 1;
            double ramp = 0.0;
            if (f < s) ramp = (s - f) * v_down[i] / kTrajectoryRate;
            else if (f > e) ramp = (f - e) * v_up[i] / kTrajectoryRate;
            lift = std::min(lift, ramp);
            if (f >= s) slid += std::min(f, e) - s;
        }
        const double offset = triangle_offset(tangential * slid / kTrajectoryRate, amplitude);
        const Vec3 anchor = {p.x + p.dir_x * offset, p.y + p.dir_y * offset, p.surface - kPenetration + lift};
        auto& pose = traj.poses[f];
        pose.presence[kRight] = true;
        for (int k = 0; k < kKeypoints; ++k) pose.keypoints[kRight][k] = place(tpl[k], p.yaw, anchor, false);
        if (left_present) {
            pose.presence[kLeft] = true;
            const double t = f / kTrajectoryRate;
            const Vec3 base = {left_base[0] + 0.01 * std::sin(t + left_phase),
                               left_base[1] + 0.01 * std::cos(0.7 * t + left_phase), left_base[2]};
            for (int k = 0; k < kKeypoints; ++k) pose.keypoints[kLeft][k] = place(flat[k], left_yaw, base, true);
        }
    }
    return traj;
}

void to_json(nlohmann::json& j, const HandTrajectory& t) {
    nlohmann::json frames = nlohmann::json::array(), presence = nlohmann::json::array();
    for (const auto& pose : t.poses) {
        frames.push_back(pose.keypoints);
        presence.push_back(pose.presence);
    }
    j = {{"rate", kTrajectoryRate}, {"frames", frames}, {"presence", presence}};
}

void from_json(const nlohmann::json& j, HandTrajectory& t) {
    if (!j.is_object()) throw ValidationError("trajectory must be an object", "trajectory");
    if (!j.contains("rate") || !j["rate"].is_number() || j["rate"].get<double>() != kTrajectoryRate)
        throw ValidationError("trajectory rate must be 30", "rate");
    if (!j.contains("frames") || !j["frames"].is_array()) throw ValidationError("frames must be an array", "frames");
    if (!j.contains("presence") || !j["presence"].is_array())
        throw ValidationError("presence must be an array", "presence");
    const auto& frames = j["frames"];
    const auto& presence = j["presence"];
    if (presence.size() != frames.size())
        throw ValidationError("presence must have one entry per frame", "presence");
    const std::size_t max_frames = static_cast<std::size_t>(std::lround(kMaxDuration * kTrajectoryRate));
    if (frames.size() > max_frames)
        throw ValidationError("trajectory longer than " + std::to_string(max_frames) + " frames", "frames");
    HandTrajectory out;
    out.poses.resize(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const std::string ff = "frames[" + std::to_string(f) + "]";
        const auto& frame = frames[f];
        if (!frame.is_array() || frame.size() != kHands) throw ValidationError("frame must hold 2 hands", ff);
        const auto& pres = presence[f];
        if (!pres.is_array() || pres.size() != kHands || !pres[0].is_boolean() || !pres[1].is_boolean())
            throw ValidationError("presence entry must be two booleans", "presence[" + std::to_string(f) + "]");
        for (int h = 0; h < kHands; ++h) {
            out.poses[f].presence[h] = pres[h].get<bool>();
            const std::string fh = ff + "[" + std::to_string(h) + "]";
            const auto& hand = frame[h];
            if (!hand.is_array() || hand.size() != kKeypoints) throw ValidationError("hand must hold 21 keypoints", fh);
            for (int k = 0; k < kKeypoints; ++k) {
                const std::string fk = fh + "[" + std::to_string(k) + "]";
                const auto& kp = hand[k];
                if (!kp.is_array() || kp.size() != 3) throw ValidationError("keypoint must have 3 coordinates", fk);
                for (int d = 0; d < 3; ++d) {
                    if (!kp[d].is_number()) throw ValidationError("keypoint coordinate must be a number", fk);
                    out.poses[f].keypoints[h][k][d] = kp[d].get<double>();
                }
            }
        }
    }
    out.validate();
    t = std::move(out);
}

}  // namespace hh::sim

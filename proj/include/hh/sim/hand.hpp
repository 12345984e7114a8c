#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/sim/scene.hpp"

namespace hh::sim {

using Vec3 = std::array<double, 3>;

inline constexpr int kKeypoints = 21;
inline constexpr int kHands = 2;
inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
/// The right hand performs every gesture; the left hand only ever hovers.
inline constexpr int kDominantHand = kRight;
inline constexpr double kTrajectoryRate = 30.0;
inline constexpr double kMaxDuration = 8.0;
inline constexpr double kMaxFingertipSpeed = 5.0;

/// Palm keypoints (wrist and the four finger MCPs) and the five fingertips can touch a surface.
inline constexpr std::array<int, 10> kContactKeypoints = {0, 4, 5, 8, 9, 12, 13, 16, 17, 20};
inline constexpr std::array<int, 5> kFingertips = {4, 8, 12, 16, 20};
/// Skeleton edges in keypoint order: wrist -> thumb, index, middle, ring, pinky chains.
extern const std::array<std::array<int, 2>, 20> kBones;

struct HandPose {
    std::array<std::array<Vec3, kKeypoints>, kHands> keypoints{};
    std::array<bool, kHands> presence{};

    bool operator==(const HandPose&) const = default;
};

/// Poses sampled at exactly 30 Hz.
struct HandTrajectory {
    std::vector<HandPose> poses;

    int n_frames() const { return static_cast<int>(poses.size()); }
    double duration() const { return n_frames() / kTrajectoryRate; }

    /// Shape/value rules independent of any scene: 1..240 frames, finite values, absent hands
    /// exactly zero, fingertip speed below 5 m/s. Errors carry a field path.
    void validate() const;
    /// validate() plus present keypoints inside the scene volume inflated by 1 m.
    void validate(const SceneModel& scene) const;

    bool operator==(const HandTrajectory&) const = default;
};

enum class Gesture { tap, knock, scratch, pat, slap, rub, drum };
inline constexpr int kNumGestures = 7;

const std::string& gesture_name(Gesture g);
/// Throws ValidationError (field "gesture") for unknown names.
Gesture parse_gesture(const std::string& name);
const std::array<Gesture, kNumGestures>& all_gestures();

enum class HandShape { flat, point, knuckle };
/// Keypoint offsets (metres) in the hand frame: x toward the thumb, y along the fingers, z up.
/// The shape's anchor keypoint sits at the origin and is the lowest point.
const std::array<Vec3, kKeypoints>& hand_template(HandShape shape);
int anchor_keypoint(HandShape shape);
std::string shape_name(HandShape shape);

/// Seeded trajectory realising `gesture` on a random patch; `duration` in seconds.
HandTrajectory sample_trajectory(const SceneModel& scene, Gesture gesture, std::uint64_t seed, double duration = 2.0);

void to_json(nlohmann::json& j, const HandTrajectory& t);
/// Parses {rate, frames [n][2][21][3], presence [n][2]} and runs validate(); errors name the field.
void from_json(const nlohmann::json& j, HandTrajectory& t);

}  // namespace hh::sim

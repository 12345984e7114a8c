#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/sim/hand.hpp"
#include "hh/sim/scene.hpp"

namespace hh::sim {

inline constexpr double kContactTolerance = 0.002;
inline constexpr double kTapMaxDuration = 0.08;
inline constexpr double kScratchMinSpeed = 0.02;

enum class ContactKind { tap, scratch, pat };

const std::string& contact_kind_name(ContactKind k);
ContactKind parse_contact_kind(const std::string& name);
/// The event kind each gesture is designed to produce.
ContactKind expected_kind(Gesture g);

/// One maximal run of contact frames of one hand.
struct ContactEvent {
    double onset = 0.0;     // s
    double duration = 0.0;  // s, contact frames / 30
    ContactKind kind = ContactKind::tap;
    int material_id = 0;
    double normal_speed = 0.0;      // m/s, downward, just before onset
    double tangential_speed = 0.0;  // m/s, mean over the run
    Cell cell;                      // under the first contacting keypoint at onset
    int hand = kDominantHand;
    int start_frame = 0;
    /// Per contact frame, bit k set when keypoint k touches.
    std::vector<std::uint32_t> keypoint_masks;
    /// Per contact frame, mean horizontal speed of the touching keypoints.
    std::vector<double> tangential_profile;

    int n_frames() const { return static_cast<int>(keypoint_masks.size()); }
    bool operator==(const ContactEvent&) const = default;
};

/// The contact predicate: keypoint over the grid and no higher than surface + 2 mm.
bool keypoint_touches(const SceneModel& scene, const Vec3& p);

std::vector<ContactEvent> detect_contacts(const SceneModel& scene, const HandTrajectory& traj);

/// [frame][hand] keypoint bitmasks rebuilt from events.
std::vector<std::array<std::uint32_t, kHands>> contact_mask(const std::vector<ContactEvent>& events, int n_frames);

void to_json(nlohmann::json& j, const ContactEvent& e);
void from_json(const nlohmann::json& j, ContactEvent& e);

}  // namespace hh::sim

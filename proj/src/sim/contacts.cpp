#include "hh/sim/contacts.hpp"

#include <bit>
#include <cmath>

#include "hh/error.hpp"

namespace hh::sim {

namespace {

/// Central difference of keypoint k of hand h at frame f (one-sided at the ends), m/s.
Vec3 velocity(const HandTrajectory& t, int h, int k, int f) {
    const int n = t.n_frames();
    if (n < 2) return {0, 0, 0};
    const int a = std::max(f - 1, 0), b = std::min(f + 1, n - 1);
    const auto& pa = t.poses[a].keypoints[h][k];
    const auto& pb = t.poses[b].keypoints[h][k];
    const double dt = (b - a) / kTrajectoryRate;
    return {(pb[0] - pa[0]) / dt, (pb[1] - pa[1]) / dt, (pb[2] - pa[2]) / dt};
}

}  // namespace

const std::string& contact_kind_name(ContactKind k) {
    static const std::array<std::string, 3> names = {"tap", "scratch", "pat"};
    return names[static_cast<int>(k)];
}

ContactKind parse_contact_kind(const std::string& name) {
    for (ContactKind k : {ContactKind::tap, ContactKind::scratch, ContactKind::pat})
        if (contact_kind_name(k) == name) return k;
    throw ValidationError("unknown contact kind '" + name + "'", "kind");
}

ContactKind expected_kind(Gesture g) {
    switch (g) {
        case Gesture::tap:
        case Gesture::knock:
        case Gesture::slap:
        case Gesture::drum: return ContactKind::tap;
        case Gesture::scratch:
        case Gesture::rub: return ContactKind::scratch;
        case Gesture::pat: return ContactKind::pat;
    }
    return ContactKind::tap;
}

bool keypoint_touches(const SceneModel& scene, const Vec3& p) {
    const auto h = scene.surface_height(p[0], p[1]);
    return h && p[2] <= *h + kContactTolerance;
}

std::vector<ContactEvent> detect_contacts(const SceneModel& scene, const HandTrajectory& traj) {
    std::vector<ContactEvent> events;
    const int n = traj.n_frames();
    for (int h = 0; h < kHands; ++h) {
        std::vector<std::uint32_t> mask(n, 0);
        for (int f = 0; f < n; ++f) {
            if (!traj.poses[f].presence[h]) continue;
            for (int k : kContactKeypoints)
                if (keypoint_touches(scene, traj.poses[f].keypoints[h][k])) mask[f] |= 1u << k;
        }
        for (int f = 0; f < n;) {
            if (!mask[f]) {
                ++f;
                continue;
            }
            ContactEvent e;
            e.hand = h;
            e.start_frame = f;
            while (f < n && mask[f]) {
                e.keypoint_masks.push_back(mask[f]);
                double speed = 0;
                for (int k = 0; k < kKeypoints; ++k)
                    if (mask[f] & (1u << k)) {
                        const Vec3 v = velocity(traj, h, k, f);
                        speed += std::hypot(v[0], v[1]);
                    }
                e.tangential_profile.push_back(speed / std::popcount(mask[f]));
                ++f;
            }
            e.onset = e.start_frame / kTrajectoryRate;
            e.duration = e.n_frames() / kTrajectoryRate;
            double total = 0;
            for (double s : e.tangential_profile) total += s;
            e.tangential_speed = total / e.n_frames();

            const int primary = std::countr_zero(e.keypoint_masks.front());
            const auto& p = traj.poses[e.start_frame].keypoints[h][primary];
            e.cell = *scene.cell_at(p[0], p[1]);
            e.material_id = scene.grid(e.cell.row, e.cell.col);
            const int before = std::max(e.start_frame - 1, 0);
            e.normal_speed = std::max(0.0, -velocity(traj, h, primary, before)[2]);

            if (e.duration < kTapMaxDuration)
                e.kind = ContactKind::tap;
            else if (e.tangential_speed > kScratchMinSpeed)
                e.kind = ContactKind::scratch;
            else
                e.kind = ContactKind::pat;  // flat-hand pats and slow presses alike
            events.push_back(std::move(e));
        }
    }
    std::stable_sort(events.begin(), events.end(), [](const ContactEvent& a, const ContactEvent& b) {
        return a.start_frame < b.start_frame;
    });
    return events;
}

std::vector<std::array<std::uint32_t, kHands>> contact_mask(const std::vector<ContactEvent>& events, int n_frames) {
    std::vector<std::array<std::uint32_t, kHands>> mask(n_frames, {0u, 0u});
    for (const auto& e : events)
        for (int i = 0; i < e.n_frames(); ++i) {
            const int f = e.start_frame + i;
            if (f >= 0 && f < n_frames) mask[f][e.hand] |= e.keypoint_masks[i];
        }
    return mask;
}

void to_json(nlohmann::json& j, const ContactEvent& e) {
    j = {{"onset", e.onset},
         {"duration", e.duration},
         {"kind", contact_kind_name(e.kind)},
         {"material_id", e.material_id},
         {"normal_speed", e.normal_speed},
         {"tangential_speed", e.tangential_speed},
         {"cell", {e.cell.row, e.cell.col}},
         {"hand", e.hand},
         {"start_frame", e.start_frame},
         {"keypoint_masks", e.keypoint_masks},
         {"tangential_profile", e.tangential_profile}};
}

void from_json(const nlohmann::json& j, ContactEvent& e) {
    e.onset = j.at("onset").get<double>();
    e.duration = j.at("duration").get<double>();
    e.kind = parse_contact_kind(j.at("kind").get<std::string>());
    e.material_id = j.at("material_id").get<int>();
    e.normal_speed = j.at("normal_speed").get<double>();
    e.tangential_speed = j.at("tangential_speed").get<double>();
    e.cell = {j.at("cell").at(0).get<int>(), j.at("cell").at(1).get<int>()};
    e.hand = j.at("hand").get<int>();
    e.start_frame = j.at("start_frame").get<int>();
    e.keypoint_masks = j.at("keypoint_masks").get<std::vector<std::uint32_t>>();
    e.tangential_profile = j.at("tangential_profile").get<std::vector<double>>();
}

}  // namespace hh::sim

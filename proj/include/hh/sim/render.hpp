#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "hh/sim/hand.hpp"
#include "hh/sim/scene.hpp"

namespace hh::sim {

enum class ViewId { front, top, side };
inline constexpr int kNumViews = 3;

const std::string& view_name(ViewId v);
/// Throws ValidationError (field "view_id") for unknown names.
ViewId parse_view(const std::string& name);

/// Row-major [height x width x channels] image; every value is a multiple of 1/255.
struct Raster {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<float> data;

    float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    bool operator==(const Raster&) const = default;
};

inline constexpr int kGlobalViewSize = 32;
inline constexpr int kLocalViewSize = 16;
/// Skeleton colours; no shaded material colour reaches them.
inline constexpr std::array<float, 3> kRightSkeleton = {1.0f, 1.0f, 1.0f};
inline constexpr std::array<float, 3> kLeftSkeleton = {1.0f, 1.0f, 0.0f};

struct Views {
    Raster global;
    Raster local;
};

/// Scene-plane point the local view is centred on: the (x, y) of the dominant hand's lowest
/// contact-eligible keypoint (falls back to the other hand, then to the scene centre).
std::array<double, 2> local_view_center(const SceneModel& scene, const HandPose& pose);

/// Global view: material colours shaded by height, hand skeletons overlaid, from the view's
/// camera. Local view: a hand-centred crop spanning 1/8 of the scene extent, without overlay.
Views render_views(const SceneModel& scene, const HandPose& pose, ViewId view);

/// Quantized 8-bit encoding used for the dataset's raster blobs.
std::string encode_raster(const Raster& r);
Raster decode_raster(const std::string& bytes, int height, int width, int channels = 3);

}  // namespace hh::sim

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/ad/nn.hpp"
#include "hh/matrix.hpp"
#include "hh/schema.hpp"
#include "hh/sim/hand.hpp"
#include "hh/sim/render.hpp"

/// Per-frame conditioning built from rendered views (4 Hz) and hand poses (30 Hz), brought to the
/// mel frame rate by nearest-neighbour upsampling and summed. Inside the tape every sequence is
/// laid out [D x n_frames] so it can be concatenated to the mel channels.
namespace hh::cond {

inline constexpr int kPoseDim = sim::kHands * sim::kKeypoints * 3;

struct CondConfig {
    int embed_dim = 128;
    std::array<int, 4> encoder_channels = {16, 32, 64, 64};
    double frame_rate = 4.0;
    double action_rate = sim::kTrajectoryRate;
    /// Ablation switches; a disabled stream contributes zeros and owns no parameters.
    bool use_visual = true;
    bool use_action = true;

    void validate() const;
    bool operator==(const CondConfig&) const = default;
};

void to_json(nlohmann::json& j, const CondConfig& c);
void from_json(const nlohmann::json& j, CondConfig& c);
/// Reads fields into `c` without finishing, for nesting inside larger configs.
void read_config(SchemaReader& r, CondConfig& c);

/// Values-only result of the conditioning pipeline, one row per spectrogram frame.
struct ConditioningSequence {
    Matrix<float> vectors;  // [n_spec_frames x D]
    double rate = 0.0;
    bool dropout_applied = false;
};

/// Creates the action projection and the shared view encoder.
template <typename T>
void init_conditioning(ad::ParamStore<T>& store, const CondConfig& cfg, std::mt19937_64& rng);

/// [126 x n_frames] pose matrix, rows ordered hand-major, then keypoint, then xyz.
template <typename T>
ad::Tensor<T> pose_matrix(const sim::HandTrajectory& traj);

/// [3 x H x W] tensor scaled to [-1, 1].
template <typename T>
ad::Tensor<T> raster_tensor(const sim::Raster& r);

/// Affine projection of each pose column followed by unit normalization; all-zero pose columns
/// yield exactly zero. Returns [D x n_frames].
template <typename T>
ad::Var<T> encode_action(ad::Tape<T>& tape, ad::ParamStore<T>& store, const CondConfig& cfg, const ad::Tensor<T>& poses);

/// Shared strided-conv encoder on one view, returns [D/2 x 1].
template <typename T>
ad::Var<T> encode_view(ad::Tape<T>& tape, ad::ParamStore<T>& store, const CondConfig& cfg, const ad::Tensor<T>& view);

/// Global then local features per frame, [D x n_frames].
template <typename T>
ad::Var<T> encode_frames(ad::Tape<T>& tape, ad::ParamStore<T>& store, const CondConfig& cfg,
                         const std::vector<ad::Tensor<T>>& global_views, const std::vector<ad::Tensor<T>>& local_views);

/// Source index for each of `n_out` output frames: round_half_up(j * rate_in / rate_out), clamped.
std::vector<int> nearest_indices(int n_out, double rate_out, int n_in, double rate_in);

/// Column gather x[:, idx[j]] for a [D x n_in] sequence.
template <typename T>
ad::Var<T> upsample(ad::Tape<T>& tape, ad::Var<T> x, const std::vector<int>& idx);

/// Upsamples both streams to `n_spec` frames at `spec_rate` and sums them. A stream given as an
/// empty Var (id < 0) contributes nothing. Throws ValidationError if a stream's duration differs
/// from the target's by more than one of its own frames.
template <typename T>
ad::Var<T> fuse(ad::Tape<T>& tape, const CondConfig& cfg, ad::Var<T> frames, ad::Var<T> actions, int n_spec,
                double spec_rate);

/// Per-clip Bernoulli(p) decision, deterministic in seed.
bool dropout_decision(double p, std::uint64_t seed);
ConditioningSequence condition_dropout(ConditioningSequence c, double p, std::uint64_t seed);

/// Inputs for one clip, prepared once and reused across training steps.
template <typename T>
struct ClipConditioningInput {
    ad::Tensor<T> poses;
    std::vector<ad::Tensor<T>> global_views;
    std::vector<ad::Tensor<T>> local_views;
};

template <typename T>
ClipConditioningInput<T> prepare_inputs(const sim::HandTrajectory& traj, const std::vector<sim::Views>& views);

/// Full pipeline on the tape: encoders, upsampling and fusion, [D x n_spec].
template <typename T>
ad::Var<T> build_conditioning(ad::Tape<T>& tape, ad::ParamStore<T>& store, const CondConfig& cfg,
                              const ClipConditioningInput<T>& in, int n_spec, double spec_rate);

/// Values-only convenience wrapper.
ConditioningSequence conditioning_sequence(ad::ParamStore<float>& store, const CondConfig& cfg,
                                           const ClipConditioningInput<float>& in, int n_spec, double spec_rate);

}  // namespace hh::cond

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/ad/adam.hpp"
#include "hh/ad/checkpoint.hpp"
#include "hh/cond/conditioning.hpp"
#include "hh/dsp/mel.hpp"
#include "hh/flow/config.hpp"
#include "hh/sim/dataset.hpp"

namespace hh::flow {

/// Trained parameters plus everything needed to use them: architecture, the dataset config the
/// model was trained on (DSP settings, scene generator) and the mel normalization stats.
struct FlowModel {
    ModelConfig config;
    sim::DatasetConfig dataset;
    std::optional<dsp::MelNormalizer> norm;
    ad::ParamStore<float> params;
    nlohmann::json info = nlohmann::json::object();

    /// Fresh parameters. Throws ConfigError if the model's mel bins disagree with the dataset's.
    static FlowModel create(const ModelConfig& config, const sim::DatasetConfig& dataset,
                            std::optional<dsp::MelNormalizer> norm, std::uint64_t seed);
    static FlowModel from_checkpoint(const ad::Checkpoint& ckpt);
    static FlowModel load(const std::filesystem::path& path);

    ad::Checkpoint to_checkpoint(const ad::AdamState<float>* adam = nullptr) const;
    const dsp::DspConfig& dsp() const { return dataset.dsp; }
    /// Mel frames for a clip of `duration` seconds.
    int n_spec_frames(double duration) const;
};

/// One clip's cached training inputs.
struct TrainingClip {
    std::string clip_id;
    std::string view_id;
    ad::Tensor<float> mel;  // [n_mels x T], normalized
    cond::ClipConditioningInput<float> inputs;
};

/// [n_mels x T] normalized tensor from a spectrogram's [T x n_mels] frames.
ad::Tensor<float> mel_tensor(const dsp::MelSpectrogram& mel, const dsp::MelNormalizer& norm);
/// Inverse of mel_tensor, clamped at the log floor.
dsp::MelSpectrogram mel_from_tensor(const ad::Tensor<float>& x, const dsp::MelNormalizer& norm, const dsp::DspConfig& cfg);

TrainingClip load_training_clip(const sim::DatasetManifest& m, const sim::ManifestEntry& e, const dsp::MelNormalizer& norm);

/// Velocity field evaluated on a tape; `cond` is [D x T].
ad::Var<float> velocity(ad::Tape<float>& tape, FlowModel& model, ad::Var<float> x, double t, ad::Var<float> cond);

/// Conditioning [D x n_spec] without gradients.
ad::Tensor<float> conditioning_tensor(FlowModel& model, const cond::ClipConditioningInput<float>& in, int n_spec);

/// Guided Euler sampling in normalized mel space, [n_mels x T].
ad::Tensor<float> sample_normalized(FlowModel& model, const ad::Tensor<float>& cond, const SampleConfig& cfg);

/// Samples and denormalizes. Throws ConfigError when the model has no normalization stats.
dsp::MelSpectrogram sample(FlowModel& model, const cond::ConditioningSequence& cond, const SampleConfig& cfg);

struct StageTimings {
    double render_ms = 0, condition_ms = 0, sample_ms = 0, vocoder_ms = 0;
};

struct GeneratedSound {
    dsp::Waveform waveform;
    dsp::MelSpectrogram mel;
    std::vector<sim::ContactEvent> events;
    StageTimings timings;
};

/// Renders views at the frame rate, encodes, fuses, samples and vocodes. Throws ValidationError for
/// an invalid or empty trajectory.
GeneratedSound generate_sound(FlowModel& model, const sim::SceneModel& scene, const sim::HandTrajectory& traj,
                              sim::ViewId view, const SampleConfig& cfg);

struct EpochLog {
    std::int64_t step = 0;
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

void to_json(nlohmann::json& j, const EpochLog& e);

struct TrainOptions {
    /// Best-validation checkpoint; the latest state with optimizer moments goes to `<out>.resume`.
    std::filesystem::path out;
    /// JSON-lines log, one line per epoch; empty disables.
    std::filesystem::path log;
    /// Continue from `<out>.resume` when it exists.
    bool resume = false;
    /// Train only on front-view entries (the no-synthetic-view ablation).
    bool front_only = false;
    /// Stop after this many optimizer steps (0 = run every epoch).
    std::int64_t max_steps = 0;
    /// Use only the first N training entries (0 = all).
    int max_train_clips = 0;
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
    std::vector<double> step_losses;
    std::vector<EpochLog> epochs;
    double best_val_loss = 0.0;
    FlowModel model;  // parameters at the end of training
};

/// Joint optimization of the vector field and the conditioning encoders with condition dropout.
/// Deterministic in (dataset, configs, options).
TrainResult train(const sim::DatasetManifest& manifest, const TrainConfig& tcfg, const ModelConfig& mcfg,
                  const TrainOptions& options);

/// Hash tying a run to its dataset and configs; checked on resume.
std::string run_hash(const sim::DatasetConfig& dataset, const ModelConfig& mcfg, const TrainConfig& tcfg, bool front_only);

}  // namespace hh::flow

#include "hh/flow/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hh/dsp/griffin_lim.hpp"
#include "hh/error.hpp"
#include "hh/flow/rectified_flow.hpp"
#include "hh/flow/unet.hpp"
#include "hh/util.hpp"

namespace hh::flow {

using ad::Tensor;
using ad::Var;

namespace {

constexpr const char* kFormat = "hh-flow";

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

FlowModel FlowModel::create(const ModelConfig& config, const sim::DatasetConfig& dataset,
                            std::optional<dsp::MelNormalizer> norm, std::uint64_t seed) {
    config.validate();
    dataset.validate();
    if (config.vf.n_mels != dataset.dsp.n_mels)
        throw ConfigError("vector_field.n_mels is " + std::to_string(config.vf.n_mels) + " but the dataset has " +
                          std::to_string(dataset.dsp.n_mels) + " mel bins");
    if (norm && !norm->valid()) throw ConfigError("mel normalization stats are degenerate (max <= min)");
    FlowModel m;
    m.config = config;
    m.dataset = dataset;
    m.norm = norm;
    std::mt19937_64 rng(seed);
    init_unet(m.params, config.vf, rng);
    cond::init_conditioning(m.params, config.cond, rng);
    return m;
}

ad::Checkpoint FlowModel::to_checkpoint(const ad::AdamState<float>* adam) const {
    ad::Checkpoint ckpt;
    ckpt.metadata = {{"format", kFormat}, {"model", config}, {"dataset", dataset}, {"info", info}};
    if (norm) {
        ckpt.metadata["mel_min"] = norm->min;
        ckpt.metadata["mel_max"] = norm->max;
    }
    if (info.contains("config_hash")) ckpt.metadata["config_hash"] = info["config_hash"];
    ad::store_params(ckpt, params, adam);
    return ckpt;
}

FlowModel FlowModel::from_checkpoint(const ad::Checkpoint& ckpt) {
    const auto& md = ckpt.metadata;
    if (md.value("format", std::string()) != kFormat) throw IncompatibleError("checkpoint does not hold a flow model");
    std::optional<dsp::MelNormalizer> norm;
    if (md.contains("mel_min") && md.contains("mel_max"))
        norm = dsp::MelNormalizer{md.at("mel_min").get<float>(), md.at("mel_max").get<float>()};
    FlowModel m = create(md.at("model").get<ModelConfig>(), md.at("dataset").get<sim::DatasetConfig>(), norm, 0);
    ad::restore_params(ckpt, m.params);
    m.info = md.value("info", nlohmann::json::object());
    return m;
}

FlowModel FlowModel::load(const std::filesystem::path& path) { return from_checkpoint(ad::load_checkpoint(path)); }

int FlowModel::n_spec_frames(double duration) const {
    return dsp().n_frames(static_cast<std::size_t>(std::lround(duration * dsp().sample_rate)));
}

Tensor<float> mel_tensor(const dsp::MelSpectrogram& mel, const dsp::MelNormalizer& norm) {
    const int n = mel.frames.rows, bins = mel.frames.cols;
    Tensor<float> out({bins, n});
    for (int f = 0; f < n; ++f)
        for (int b = 0; b < bins; ++b) out.data[static_cast<std::size_t>(b) * n + f] = norm.normalize(mel.frames(f, b));
    return out;
}

dsp::MelSpectrogram mel_from_tensor(const Tensor<float>& x, const dsp::MelNormalizer& norm, const dsp::DspConfig& cfg) {
    const int bins = x.dim(0), n = x.dim(1);
    const float floor = static_cast<float>(std::log(cfg.log_floor));
    dsp::MelSpectrogram mel;
    mel.frames = Matrix<float>(n, bins);
    mel.frame_rate = cfg.frame_rate();
    mel.fingerprint = cfg.fingerprint();
    for (int f = 0; f < n; ++f)
        for (int b = 0; b < bins; ++b)
            mel.frames(f, b) = std::max(floor, norm.denormalize(x.data[static_cast<std::size_t>(b) * n + f]));
    return mel;
}

TrainingClip load_training_clip(const sim::DatasetManifest& m, const sim::ManifestEntry& e, const dsp::MelNormalizer& norm) {
    TrainingClip c;
    c.clip_id = e.clip_id;
    c.view_id = e.view_id;
    c.mel = mel_tensor(dsp::waveform_to_mel(sim::load_clip_audio(m, e), m.config.dsp), norm);
    c.inputs = cond::prepare_inputs<float>(sim::load_clip_trajectory(m, e), sim::load_clip_views(m, e));
    return c;
}

Var<float> velocity(ad::Tape<float>& tape, FlowModel& model, Var<float> x, double t, Var<float> cond) {
    return unet_forward(tape, model.params, model.config.vf, x, t, cond);
}

Tensor<float> conditioning_tensor(FlowModel& model, const cond::ClipConditioningInput<float>& in, int n_spec) {
    ad::Tape<float> tape(false);
    return cond::build_conditioning(tape, model.params, model.config.cond, in, n_spec, model.dsp().frame_rate()).value();
}

Tensor<float> sample_normalized(FlowModel& model, const Tensor<float>& cond, const SampleConfig& cfg) {
    cfg.validate();
    if (cond.rank() != 2 || cond.dim(0) != model.config.cond.embed_dim)
        throw ValidationError("conditioning must be [" + std::to_string(model.config.cond.embed_dim) + " x T], got " +
                              ad::shape_str(cond.shape));
    const Tensor<float> zeros(cond.shape);
    const GuidedVelocity v = [&](const Tensor<float>& x, double t, bool conditional) {
        ad::Tape<float> tape(false);
        return velocity(tape, model, tape.constant(x), t, tape.constant(conditional ? cond : zeros)).value();
    };
    return euler_sample(v, {model.config.vf.n_mels, cond.dim(1)}, cfg.steps, cfg.guidance_scale, derive_seed(cfg.seed, 0x5a3));
}

dsp::MelSpectrogram sample(FlowModel& model, const cond::ConditioningSequence& c, const SampleConfig& cfg) {
    if (!model.norm) throw ConfigError("model has no mel normalization stats; cannot denormalize samples");
    const int n = c.vectors.rows, d = c.vectors.cols;
    Tensor<float> cond({d, n});
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < d; ++k) cond.data[static_cast<std::size_t>(k) * n + j] = c.vectors(j, k);
    return mel_from_tensor(sample_normalized(model, cond, cfg), *model.norm, model.dsp());
}

GeneratedSound generate_sound(FlowModel& model, const sim::SceneModel& scene, const sim::HandTrajectory& traj,
                              sim::ViewId view, const SampleConfig& cfg) {
    if (!model.norm) throw ConfigError("model has no mel normalization stats; cannot denormalize samples");
    if (traj.n_frames() == 0) throw ValidationError("trajectory has no frames", "frames");
    traj.validate(scene);
    GeneratedSound out;
    auto t0 = std::chrono::steady_clock::now();
    const auto views = sim::render_clip_views(scene, traj, view, model.config.cond.frame_rate);
    out.timings.render_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    const int n_spec = model.n_spec_frames(traj.duration());
    const auto cond = conditioning_tensor(model, cond::prepare_inputs<float>(traj, views), n_spec);
    out.timings.condition_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    out.mel = mel_from_tensor(sample_normalized(model, cond, cfg), *model.norm, model.dsp());
    out.timings.sample_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    out.waveform = dsp::griffin_lim(out.mel, model.dsp(), cfg.griffin_lim_iterations);
    out.timings.vocoder_ms = ms_since(t0);
    out.events = sim::detect_contacts(scene, traj);
    return out;
}

}  // namespace hh::flow

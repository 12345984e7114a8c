#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "hh/error.hpp"
#include "hh/flow/model.hpp"
#include "hh/flow/rectified_flow.hpp"
#include "hh/util.hpp"

namespace hh::flow {

using ad::Tensor;
using ad::Var;

namespace {

constexpr std::uint64_t kValSeed = 0x7a1;

std::filesystem::path resume_path(const std::filesystem::path& out) { return out.string() + ".resume"; }

std::vector<TrainingClip> load_clips(const sim::DatasetManifest& m, const std::vector<const sim::ManifestEntry*>& entries,
                                     const dsp::MelNormalizer& norm) {
    std::vector<TrainingClip> clips;
    std::map<std::string, Tensor<float>> mels;
    for (const auto* e : entries) {
        TrainingClip c;
        c.clip_id = e->clip_id;
        c.view_id = e->view_id;
        auto it = mels.find(e->clip_id);
        if (it == mels.end())
            it = mels.emplace(e->clip_id, mel_tensor(dsp::waveform_to_mel(sim::load_clip_audio(m, *e), m.config.dsp), norm)).first;
        c.mel = it->second;
        c.inputs = cond::prepare_inputs<float>(sim::load_clip_trajectory(m, *e), sim::load_clip_views(m, *e));
        clips.push_back(std::move(c));
    }
    return clips;
}

/// Loss for one clip; `dropped` replaces the conditioning with zeros.
Var<float> clip_loss(ad::Tape<float>& tape, FlowModel& model, const TrainingClip& clip, std::uint64_t seed, bool dropped) {
    const int n = clip.mel.dim(1);
    const Var<float> cond = dropped ? tape.constant(Tensor<float>({model.config.cond.embed_dim, n}))
                                    : cond::build_conditioning(tape, model.params, model.config.cond, clip.inputs, n,
                                                               model.dsp().frame_rate());
    const VelocityNet<float> net = [&](ad::Tape<float>& tp, Var<float> x, double t) { return velocity(tp, model, x, t, cond); };
    return rf_loss(tape, net, clip.mel, draw_flow<float>(clip.mel.shape, seed));
}

double validation_loss(FlowModel& model, const std::vector<TrainingClip>& val) {
    if (val.empty()) return 0.0;
    double total = 0;
    for (std::size_t j = 0; j < val.size(); ++j) {
        ad::Tape<float> tape(false);
        total += clip_loss(tape, model, val[j], derive_seed(kValSeed, j), false).value().data[0];
    }
    return total / double(val.size());
}

}  // namespace

void to_json(nlohmann::json& j, const EpochLog& e) {
    j = {{"step", e.step}, {"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}};
}

std::string run_hash(const sim::DatasetConfig& dataset, const ModelConfig& mcfg, const TrainConfig& tcfg, bool front_only) {
    const nlohmann::json j = {{"dataset", dataset.hash()}, {"model", mcfg}, {"train", tcfg}, {"front_only", front_only}};
    return hex64(fnv1a(j.dump()));
}

TrainResult train(const sim::DatasetManifest& manifest, const TrainConfig& tcfg, const ModelConfig& mcfg,
                  const TrainOptions& options) {
    tcfg.validate();
    const dsp::MelNormalizer norm{manifest.mel_min, manifest.mel_max};
    if (!norm.valid()) throw ConfigError("dataset manifest has no usable mel normalization stats");

    auto train_entries = manifest.split("train", options.front_only);
    if (options.max_train_clips > 0 && int(train_entries.size()) > options.max_train_clips)
        train_entries.resize(options.max_train_clips);
    if (train_entries.empty()) throw ValidationError("dataset has no training clips");
    auto val_entries = manifest.split("val", true);
    if (tcfg.val_clips > 0 && int(val_entries.size()) > tcfg.val_clips) val_entries.resize(tcfg.val_clips);

    TrainResult result;
    result.model = FlowModel::create(mcfg, manifest.config, norm, derive_seed(tcfg.seed, 0x1417));
    FlowModel& model = result.model;
    const std::string hash = run_hash(manifest.config, mcfg, tcfg, options.front_only);
    model.info = {{"config_hash", hash},
                  {"train", tcfg},
                  {"front_only", options.front_only},
                  {"max_train_clips", options.max_train_clips},
                  {"n_train_entries", train_entries.size()}};

    const auto train_clips = load_clips(manifest, train_entries, norm);
    const auto val_clips = load_clips(manifest, val_entries, norm);
    const int n = static_cast<int>(train_clips.size());
    const int batch = std::min(tcfg.batch_size, n);
    const int steps_per_epoch = (n + batch - 1) / batch;

    ad::AdamState<float> adam;
    std::int64_t step = 0;
    int first_epoch = 0;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    if (options.resume && !options.out.empty() && std::filesystem::exists(resume_path(options.out))) {
        const auto ckpt = ad::load_checkpoint(resume_path(options.out));
        ad::require_config_hash(ckpt, hash);
        ad::restore_params(ckpt, model.params, &adam);
        const auto& info = ckpt.metadata.at("info");
        step = info.at("step").get<std::int64_t>();
        first_epoch = info.at("epoch").get<int>() + 1;
        result.best_val_loss = info.at("best_val_loss").get<double>();
    }
    std::ofstream log;
    if (!options.log.empty()) {
        log.open(options.log, first_epoch > 0 ? std::ios::app : std::ios::trunc);
        if (!log) throw IoError("cannot open training log " + options.log.string());
    }

    bool stop = false;
    for (int epoch = first_epoch; epoch < tcfg.epochs && !stop; ++epoch) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(derive_seed(tcfg.seed, 1000 + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0;
        int epoch_steps = 0;
        double lr = 0;
        for (int b0 = 0; b0 < n && !stop; b0 += batch) {
            const int b1 = std::min(n, b0 + batch);
            lr = learning_rate(tcfg, step, steps_per_epoch);
            model.params.zero_grad();
            double loss_sum = 0;
            for (int i = b0; i < b1; ++i) {
                const std::uint64_t seed = derive_seed(derive_seed(tcfg.seed, 0x57e9 + step), i - b0);
                const bool dropped = cond::dropout_decision(tcfg.dropout, seed);
                ad::Tape<float> tape;
                const auto loss = clip_loss(tape, model, train_clips[order[i]], seed, dropped);
                loss_sum += loss.value().data[0];
                tape.backward(ad::scale(loss, 1.0f / float(b1 - b0)));
            }
            ad::adam_step(model.params, adam, lr);
            ++step;
            const double mean = loss_sum / (b1 - b0);
            result.step_losses.push_back(mean);
            epoch_loss += mean;
            ++epoch_steps;
            if (options.max_steps > 0 && step >= options.max_steps) stop = true;
        }

        EpochLog entry{step, epoch, lr, epoch_loss / std::max(1, epoch_steps), validation_loss(model, val_clips)};
        result.epochs.push_back(entry);
        if (log) log << nlohmann::json(entry).dump() << "\n" << std::flush;
        const bool improved = entry.val_loss < result.best_val_loss;
        if (improved) result.best_val_loss = entry.val_loss;
        model.info["epoch"] = epoch;
        model.info["step"] = step;
        model.info["best_val_loss"] = result.best_val_loss;
        if (!options.out.empty()) {
            if (improved) {
                auto best = model.to_checkpoint();
                best.metadata["info"]["val_loss"] = entry.val_loss;
                ad::save_checkpoint(options.out, best);
            }
            ad::save_checkpoint(resume_path(options.out), model.to_checkpoint(&adam));
        }
        if (options.on_epoch) options.on_epoch(entry);
    }
    return result;
}

}  // namespace hh::flow

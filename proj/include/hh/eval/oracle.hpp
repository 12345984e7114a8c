#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/ad/checkpoint.hpp"
#include "hh/ad/nn.hpp"
#include "hh/dsp/mel.hpp"
#include "hh/sim/dataset.hpp"

namespace hh::eval {

struct OracleConfig {
    int channels = 64;
    /// Width F of the pooled feature layer.
    int feature_dim = 32;
    int epochs = 30;
    int batch_size = 16;
    double lr = 1e-3;
    /// Held-out accuracy every head must reach.
    double gate = 0.9;
    /// Also train on Griffin-Lim resyntheses of the training clips.
    bool vocoder_augment = true;
    int griffin_lim_iterations = 64;
    /// Control experiment: permute the training labels.
    bool shuffle_labels = false;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const OracleConfig&) const = default;
};

void to_json(nlohmann::json& j, const OracleConfig& c);
void from_json(const nlohmann::json& j, OracleConfig& c);

struct OraclePrediction {
    int action = 0;
    int material = 0;
    std::vector<double> action_probs;
    std::vector<double> material_probs;
    std::vector<double> features;
};

/// Small conv classifier over normalized log-mel with an action head and a material head on a
/// shared time-pooled feature vector.
struct OracleClassifier {
    OracleConfig config;
    dsp::DspConfig dsp;
    dsp::MelNormalizer norm;
    std::vector<std::string> actions;
    std::vector<std::string> materials;
    ad::ParamStore<float> params;
    double action_accuracy = 0.0;
    double material_accuracy = 0.0;
    int n_heldout = 0;

    /// Throws ValidationError when the waveform's sample rate differs from the classifier's.
    OraclePrediction predict(const dsp::Waveform& w);
    OraclePrediction predict_mel(const dsp::MelSpectrogram& mel);
    bool passes_gate() const;
    /// Throws EvaluationError naming the failing head.
    void require_gate() const;
    std::string hash() const;

    ad::Checkpoint to_checkpoint() const;
    static OracleClassifier from_checkpoint(const ad::Checkpoint& ckpt);
    void save(const std::filesystem::path& path) const;
    static OracleClassifier load(const std::filesystem::path& path);
};

template <typename T>
void init_oracle(ad::ParamStore<T>& store, int n_mels, int n_actions, int n_materials, const OracleConfig& cfg,
                 std::mt19937_64& rng);

template <typename T>
struct OracleOutputs {
    ad::Var<T> features;         // [F x 1]
    ad::Var<T> action_logits;    // [n_actions x 1]
    ad::Var<T> material_logits;  // [n_materials x 1]
};

/// `mel` is [n_mels x T] in normalized units.
template <typename T>
OracleOutputs<T> oracle_forward(ad::Tape<T>& tape, ad::ParamStore<T>& store, ad::Var<T> mel);

/// Trains on the train split and scores held-out (val + test) front-view clips. No gate check.
OracleClassifier fit_oracle(const sim::DatasetManifest& manifest, const OracleConfig& cfg);

/// fit_oracle followed by require_gate.
OracleClassifier train_oracle_classifier(const sim::DatasetManifest& manifest, const OracleConfig& cfg);

}  // namespace hh::eval

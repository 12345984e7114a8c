#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hh/eval/oracle.hpp"
#include "hh/eval/report.hpp"
#include "hh/flow/model.hpp"

namespace hh::eval {

struct Agreement {
    double all = 0.0;
    double action = 0.0;
    double material = 0.0;
};

/// Fractions of (ground truth, generated) pairs given the same joint / action / material label.
Agreement label_agreement(const std::vector<std::pair<dsp::Waveform, dsp::Waveform>>& pairs, OracleClassifier& clf);
/// Fréchet distance between Gaussians fit to the classifier's pooled features; needs F + 1 clips per set.
double frechet_feature_distance(const std::vector<dsp::Waveform>& a, const std::vector<dsp::Waveform>& b,
                                OracleClassifier& clf);
/// exp(E KL(p(material|x) || p(material))) over the set.
double score_entropy(const std::vector<dsp::Waveform>& set, OracleClassifier& clf);

struct EvalOptions {
    flow::SampleConfig sample;
    std::string split = "test";
    /// Evaluate only the first N front-view clips of the split (0 = all).
    int max_clips = 0;
    std::string variant = "full";
};

/// A held-out clip and the model's sound for it, generated from the stored trajectory and views.
struct ClipOutcome {
    const sim::ManifestEntry* entry = nullptr;
    dsp::Waveform truth;
    dsp::Waveform generated;
    ad::Tensor<float> truth_mel;      // normalized [n_mels x T]
    ad::Tensor<float> generated_mel;  // normalized [n_mels x T]
};

/// Sampling seed for a clip: derived from the config seed and the clip id, so subsets agree.
std::uint64_t clip_sample_seed(const flow::SampleConfig& cfg, const std::string& clip_id);

std::vector<ClipOutcome> generate_outcomes(flow::FlowModel& model, const sim::DatasetManifest& manifest,
                                           const std::vector<const sim::ManifestEntry*>& entries,
                                           const flow::SampleConfig& cfg);

std::vector<const sim::ManifestEntry*> eval_entries(const sim::DatasetManifest& manifest, const EvalOptions& opts);

/// Metrics over generated outcomes. The classifier must pass its gate.
MetricReport score_outcomes(const std::vector<ClipOutcome>& outcomes, OracleClassifier& clf);

/// Generates the split and scores it. Throws EvaluationError when the classifier is below its gate.
MetricReport evaluate(flow::FlowModel& model, const sim::DatasetManifest& manifest, OracleClassifier& clf,
                      const EvalOptions& opts);

/// Transport error: Wasserstein-1 distance between the value distributions of the generated and
/// ground-truth normalized mels.
double transport_error(const ClipOutcome& o);

struct TransportComparison {
    std::vector<double> few_steps;
    std::vector<double> many_steps;
    /// Fraction of clips where the many-step error is strictly lower.
    double fraction_improved = 0.0;
};

TransportComparison compare_transport(flow::FlowModel& model, const sim::DatasetManifest& manifest, const EvalOptions& opts,
                                      int few_steps, int many_steps);

struct SyncResult {
    std::vector<std::string> clip_ids;
    std::vector<double> lags;  // s, generated relative to truth
    double fraction_within = 0.0;
};

/// Clips whose only contact event is a tap.
std::vector<const sim::ManifestEntry*> single_tap_entries(const sim::DatasetManifest& manifest, const std::string& split);

/// A single-tap interaction on a held-out scene with its simulated sound.
struct SyncProbe {
    std::string clip_id;
    sim::SceneModel scene;
    sim::HandTrajectory trajectory;
    dsp::Waveform truth;
};

/// The split's single-tap clips, topped up to `min_count` with freshly simulated single-tap
/// interactions on the split's scenes (deterministic in the dataset seed).
std::vector<SyncProbe> single_tap_probes(const sim::DatasetManifest& manifest, const std::string& split, int min_count);

/// Envelope cross-correlation lag between generated and simulated sound; `tolerance` in seconds.
SyncResult sync_check(flow::FlowModel& model, const std::vector<SyncProbe>& probes, const flow::SampleConfig& cfg,
                      double tolerance = 0.05, double envelope_ms = 10.0, double max_lag = 0.5);

/// full, no_visual, no_hand_pose, no_synthetic_view.
const std::vector<std::string>& ablation_variants();
/// Adjusts the configs for a variant; throws ConfigError for an unknown name.
void apply_variant(const std::string& variant, flow::ModelConfig& mcfg, flow::TrainOptions& opts);
std::filesystem::path ablation_checkpoint(const std::filesystem::path& dir, const std::string& variant, std::uint64_t seed);

struct AblationPlan {
    std::vector<std::string> variants = ablation_variants();
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    flow::TrainConfig train = flow::TrainConfig::desk();
    flow::ModelConfig model = flow::ModelConfig::desk();
};

/// Trains every (variant, seed) checkpoint under `dir`, skipping ones already present for the same
/// run hash. `progress` receives a line per finished epoch.
void train_ablation(const sim::DatasetManifest& manifest, const std::filesystem::path& dir, const AblationPlan& plan,
                    const std::function<void(const std::string&)>& progress = {});

/// One report per (variant, seed). Throws IoError naming a missing checkpoint.
std::vector<MetricReport> run_ablation_suite(const sim::DatasetManifest& manifest, const std::filesystem::path& dir,
                                             const AblationPlan& plan, OracleClassifier& clf, const EvalOptions& opts);

struct AblationVerdict {
    /// Median over seeds of (full - variant), per variant.
    std::map<std::string, double> material_drop;
    std::map<std::string, double> action_drop;
    bool visual_drops_material_most = false;
    bool hand_pose_drops_action_most = false;
    bool synthetic_view_degrades = false;
};

/// Directional checks; needs a full report for every seed of every variant.
AblationVerdict ablation_verdict(const std::vector<MetricReport>& reports);

}  // namespace hh::eval

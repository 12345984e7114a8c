#include "hh/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hh/dsp/griffin_lim.hpp"
#include "hh/error.hpp"
#include "hh/eval/metrics.hpp"
#include "hh/util.hpp"

namespace hh::eval {

namespace {

Matrix<double> feature_matrix(const std::vector<dsp::Waveform>& set, OracleClassifier& clf) {
    Matrix<double> m(static_cast<int>(set.size()), clf.config.feature_dim);
    for (int r = 0; r < m.rows; ++r) {
        const auto p = clf.predict(set[r]);
        for (int c = 0; c < m.cols; ++c) m(r, c) = p.features[c];
    }
    return m;
}

double median(std::vector<double> v) {
    if (v.empty()) throw ValidationError("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Pads with zeros or truncates so generated audio lines up sample-for-sample with the truth.
dsp::Waveform match_length(dsp::Waveform w, std::size_t n) {
    w.samples.resize(n, 0.0f);
    return w;
}

}  // namespace

Agreement label_agreement(const std::vector<std::pair<dsp::Waveform, dsp::Waveform>>& pairs, OracleClassifier& clf) {
    if (pairs.empty()) throw ValidationError("label agreement needs at least one pair");
    int all = 0, action = 0, material = 0;
    for (const auto& [gt, gen] : pairs) {
        const auto a = clf.predict(gt), b = clf.predict(gen);
        action += a.action == b.action;
        material += a.material == b.material;
        all += a.action == b.action && a.material == b.material;
    }
    const double n = double(pairs.size());
    return {all / n, action / n, material / n};
}

double frechet_feature_distance(const std::vector<dsp::Waveform>& a, const std::vector<dsp::Waveform>& b,
                                OracleClassifier& clf) {
    const int need = clf.config.feature_dim + 1;
    if (int(a.size()) < need || int(b.size()) < need)
        throw ValidationError("Fréchet feature distance needs at least " + std::to_string(need) + " clips per set (got " +
                              std::to_string(a.size()) + " and " + std::to_string(b.size()) + ")");
    return frechet_distance(feature_matrix(a, clf), feature_matrix(b, clf), need);
}

double score_entropy(const std::vector<dsp::Waveform>& set, OracleClassifier& clf) {
    if (set.empty()) throw ValidationError("score entropy needs at least one clip");
    Matrix<double> probs(static_cast<int>(set.size()), static_cast<int>(clf.materials.size()));
    for (int r = 0; r < probs.rows; ++r) {
        const auto p = clf.predict(set[r]);
        for (int c = 0; c < probs.cols; ++c) probs(r, c) = p.material_probs[c];
    }
    return score_entropy(probs);
}

std::uint64_t clip_sample_seed(const flow::SampleConfig& cfg, const std::string& clip_id) {
    return derive_seed(cfg.seed, fnv1a(clip_id));
}

std::vector<const sim::ManifestEntry*> eval_entries(const sim::DatasetManifest& manifest, const EvalOptions& opts) {
    auto entries = manifest.split(opts.split, true);
    if (entries.empty()) throw ValidationError("split '" + opts.split + "' has no clips", "split");
    if (opts.max_clips > 0 && int(entries.size()) > opts.max_clips) entries.resize(opts.max_clips);
    return entries;
}

std::vector<ClipOutcome> generate_outcomes(flow::FlowModel& model, const sim::DatasetManifest& manifest,
                                           const std::vector<const sim::ManifestEntry*>& entries,
                                           const flow::SampleConfig& cfg) {
    if (!model.norm) throw ConfigError("model has no mel normalization stats; cannot denormalize samples");
    if (!(model.dataset.dsp == manifest.config.dsp))
        throw ConfigError("model was trained under a different DSP config than the evaluation dataset");
    std::vector<ClipOutcome> out;
    for (const auto* e : entries) {
        ClipOutcome o;
        o.entry = e;
        o.truth = sim::load_clip_audio(manifest, *e);
        const auto truth_mel = dsp::waveform_to_mel(o.truth, model.dsp());
        o.truth_mel = flow::mel_tensor(truth_mel, *model.norm);
        const auto inputs = cond::prepare_inputs<float>(sim::load_clip_trajectory(manifest, *e), sim::load_clip_views(manifest, *e));
        const auto cond = flow::conditioning_tensor(model, inputs, truth_mel.n_frames());
        flow::SampleConfig clip_cfg = cfg;
        clip_cfg.seed = clip_sample_seed(cfg, e->clip_id);
        o.generated_mel = flow::sample_normalized(model, cond, clip_cfg);
        const auto mel = flow::mel_from_tensor(o.generated_mel, *model.norm, model.dsp());
        o.generated = match_length(dsp::griffin_lim(mel, model.dsp(), cfg.griffin_lim_iterations), o.truth.samples.size());
        out.push_back(std::move(o));
    }
    return out;
}

MetricReport score_outcomes(const std::vector<ClipOutcome>& outcomes, OracleClassifier& clf) {
    clf.require_gate();
    if (outcomes.empty()) throw ValidationError("no clips to score");
    MetricReport r;
    r.n_clips = static_cast<int>(outcomes.size());
    r.oracle_hash = clf.hash();
    std::vector<std::pair<dsp::Waveform, dsp::Waveform>> pairs;
    std::vector<dsp::Waveform> truths, gens;
    for (const auto& o : outcomes) {
        r.stft_l2 += stft_distance(o.truth, o.generated, clf.dsp) / r.n_clips;
        r.envelope_l2 += envelope_distance(o.truth, o.generated) / r.n_clips;
        pairs.emplace_back(o.truth, o.generated);
        truths.push_back(o.truth);
        gens.push_back(o.generated);
    }
    const auto agree = label_agreement(pairs, clf);
    r.label_agreement_all = agree.all;
    r.label_agreement_action = agree.action;
    r.label_agreement_material = agree.material;
    r.frechet_feature_distance = frechet_feature_distance(truths, gens, clf);
    r.score_entropy = score_entropy(gens, clf);
    return r;
}

MetricReport evaluate(flow::FlowModel& model, const sim::DatasetManifest& manifest, OracleClassifier& clf,
                      const EvalOptions& opts) {
    clf.require_gate();
    if (!(clf.dsp == manifest.config.dsp)) throw ConfigError("oracle classifier was trained under a different DSP config");
    auto r = score_outcomes(generate_outcomes(model, manifest, eval_entries(manifest, opts), opts.sample), clf);
    r.variant = opts.variant;
    r.seed = opts.sample.seed;
    r.model_hash = model.info.value("config_hash", std::string());
    r.dataset_hash = manifest.config.hash();
    r.sample_hash = hex64(fnv1a(nlohmann::json(opts.sample).dump()));
    r.validate();
    return r;
}

double transport_error(const ClipOutcome& o) {
    return value_wasserstein(o.generated_mel.data, o.truth_mel.data);
}

TransportComparison compare_transport(flow::FlowModel& model, const sim::DatasetManifest& manifest, const EvalOptions& opts,
                                      int few_steps, int many_steps) {
    const auto entries = eval_entries(manifest, opts);
    flow::SampleConfig few = opts.sample, many = opts.sample;
    few.steps = few_steps;
    many.steps = many_steps;
    TransportComparison c;
    for (const auto& o : generate_outcomes(model, manifest, entries, few)) c.few_steps.push_back(transport_error(o));
    for (const auto& o : generate_outcomes(model, manifest, entries, many)) c.many_steps.push_back(transport_error(o));
    int better = 0;
    for (std::size_t i = 0; i < c.few_steps.size(); ++i) better += c.many_steps[i] < c.few_steps[i];
    c.fraction_improved = double(better) / double(c.few_steps.size());
    return c;
}

std::vector<const sim::ManifestEntry*> single_tap_entries(const sim::DatasetManifest& manifest, const std::string& split) {
    std::vector<const sim::ManifestEntry*> out;
    for (const auto* e : manifest.split(split, true))
        if (e->events.size() == 1 && e->events[0].kind == sim::ContactKind::tap) out.push_back(e);
    return out;
}

std::vector<SyncProbe> single_tap_probes(const sim::DatasetManifest& manifest, const std::string& split, int min_count) {
    std::vector<SyncProbe> probes;
    std::map<std::uint64_t, sim::SceneModel> scenes;
    auto scene = [&](std::uint64_t seed) -> const sim::SceneModel& {
        auto it = scenes.find(seed);
        if (it == scenes.end()) it = scenes.emplace(seed, sim::scene_for(manifest.config, seed)).first;
        return it->second;
    };
    std::vector<std::uint64_t> scene_seeds;
    for (const auto* e : manifest.split(split, true)) {
        if (std::find(scene_seeds.begin(), scene_seeds.end(), e->scene_seed) == scene_seeds.end())
            scene_seeds.push_back(e->scene_seed);
    }
    for (const auto* e : single_tap_entries(manifest, split))
        probes.push_back({e->clip_id, scene(e->scene_seed), sim::load_clip_trajectory(manifest, *e), sim::load_clip_audio(manifest, *e)});
    if (scene_seeds.empty()) return probes;
    const int max_attempts = 50 * std::max(1, min_count);
    for (int k = 0; int(probes.size()) < min_count && k < max_attempts; ++k) {
        const std::uint64_t seed = scene_seeds[k % scene_seeds.size()];
        const auto& sc = scene(seed);
        sim::Clip c;
        try {
            c = sim::generate_clip(manifest.config, sc, sim::Gesture::tap, derive_seed(seed, 0x5a9c0000ULL + k));
        } catch (const ValidationError&) {
            continue;
        }
        if (c.events.size() != 1 || c.events[0].kind != sim::ContactKind::tap) continue;
        char id[32];
        std::snprintf(id, sizeof id, "_probe%03d", k);
        probes.push_back({sc.id + id, sc, std::move(c.trajectory), std::move(c.sound.waveform)});
    }
    return probes;
}

SyncResult sync_check(flow::FlowModel& model, const std::vector<SyncProbe>& probes, const flow::SampleConfig& cfg,
                      double tolerance, double envelope_ms, double max_lag) {
    if (probes.empty()) throw ValidationError("no single-tap clips to check synchronization on");
    SyncResult r;
    int within = 0;
    for (const auto& p : probes) {
        flow::SampleConfig clip_cfg = cfg;
        clip_cfg.seed = clip_sample_seed(cfg, p.clip_id);
        const auto gen = flow::generate_sound(model, p.scene, p.trajectory, sim::ViewId::front, clip_cfg);
        const double lag = envelope_lag(p.truth, match_length(gen.waveform, p.truth.samples.size()), envelope_ms, max_lag);
        r.clip_ids.push_back(p.clip_id);
        r.lags.push_back(lag);
        within += std::abs(lag) <= tolerance + 1e-12;
    }
    r.fraction_within = double(within) / double(r.lags.size());
    return r;
}

const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> v = {"full", "no_visual", "no_hand_pose", "no_synthetic_view"};
    return v;
}

void apply_variant(const std::string& variant, flow::ModelConfig& mcfg, flow::TrainOptions& opts) {
    if (variant == "full") return;
    if (variant == "no_visual")
        mcfg.cond.use_visual = false;
    else if (variant == "no_hand_pose")
        mcfg.cond.use_action = false;
    else if (variant == "no_synthetic_view")
        opts.front_only = true;
    else
        throw ConfigError("unknown ablation variant '" + variant + "'");
}

std::filesystem::path ablation_checkpoint(const std::filesystem::path& dir, const std::string& variant, std::uint64_t seed) {
    return dir / (variant + "_s" + std::to_string(seed) + ".ckpt");
}

void train_ablation(const sim::DatasetManifest& manifest, const std::filesystem::path& dir, const AblationPlan& plan,
                    const std::function<void(const std::string&)>& progress) {
    std::filesystem::create_directories(dir);
    for (const auto& variant : plan.variants)
        for (const auto seed : plan.seeds) {
            flow::ModelConfig mcfg = plan.model;
            flow::TrainConfig tcfg = plan.train;
            tcfg.seed = seed;
            flow::TrainOptions opts;
            apply_variant(variant, mcfg, opts);
            opts.out = ablation_checkpoint(dir, variant, seed);
            opts.log = opts.out.string() + ".log";
            opts.resume = true;
            const std::filesystem::path state = opts.out.string() + ".resume";
            if (std::filesystem::exists(opts.out) && std::filesystem::exists(state)) {
                const auto ckpt = ad::load_checkpoint(state);
                const bool same = ckpt.metadata.value("config_hash", std::string()) ==
                                  flow::run_hash(manifest.config, mcfg, tcfg, opts.front_only);
                if (same && ckpt.metadata.at("info").value("epoch", -1) == tcfg.epochs - 1) continue;
                if (!same) std::filesystem::remove(state);
            }
            const std::string tag = variant + " seed " + std::to_string(seed);
            if (progress)
                opts.on_epoch = [&](const flow::EpochLog& e) {
                    progress(tag + " epoch " + std::to_string(e.epoch) + " train " + std::to_string(e.train_loss) + " val " +
                             std::to_string(e.val_loss));
                };
            flow::train(manifest, tcfg, mcfg, opts);
        }
}

std::vector<MetricReport> run_ablation_suite(const sim::DatasetManifest& manifest, const std::filesystem::path& dir,
                                             const AblationPlan& plan, OracleClassifier& clf, const EvalOptions& opts) {
    clf.require_gate();
    for (const auto& variant : plan.variants)
        for (const auto seed : plan.seeds)
            if (!std::filesystem::exists(ablation_checkpoint(dir, variant, seed)))
                throw IoError("missing ablation checkpoint " + ablation_checkpoint(dir, variant, seed).string());
    std::vector<MetricReport> reports;
    for (const auto& variant : plan.variants)
        for (const auto seed : plan.seeds) {
            auto model = flow::FlowModel::load(ablation_checkpoint(dir, variant, seed));
            EvalOptions o = opts;
            o.variant = variant;
            auto r = evaluate(model, manifest, clf, o);
            r.seed = seed;
            reports.push_back(std::move(r));
        }
    return reports;
}

AblationVerdict ablation_verdict(const std::vector<MetricReport>& reports) {
    std::map<std::uint64_t, const MetricReport*> full;
    for (const auto& r : reports)
        if (r.variant == "full") full[r.seed] = &r;
    if (full.empty()) throw ValidationError("ablation table has no full-model reports");
    std::map<std::string, std::vector<double>> mat, act, stft, env, all;
    for (const auto& r : reports) {
        if (r.variant == "full") continue;
        const auto it = full.find(r.seed);
        if (it == full.end())
            throw ValidationError("no full-model report for seed " + std::to_string(r.seed) + " (variant " + r.variant + ")");
        const auto& f = *it->second;
        mat[r.variant].push_back(f.label_agreement_material - r.label_agreement_material);
        act[r.variant].push_back(f.label_agreement_action - r.label_agreement_action);
        stft[r.variant].push_back(r.stft_l2 - f.stft_l2);
        env[r.variant].push_back(r.envelope_l2 - f.envelope_l2);
        all[r.variant].push_back(f.label_agreement_all - r.label_agreement_all);
    }
    AblationVerdict v;
    for (const auto& [name, drops] : mat) v.material_drop[name] = median(drops);
    for (const auto& [name, drops] : act) v.action_drop[name] = median(drops);
    auto largest = [](const std::map<std::string, double>& drops, const std::string& who) {
        const auto it = drops.find(who);
        if (it == drops.end()) return false;
        for (const auto& [name, d] : drops)
            if (name != who && d >= it->second) return false;
        return true;
    };
    v.visual_drops_material_most = largest(v.material_drop, "no_visual");
    v.hand_pose_drops_action_most = largest(v.action_drop, "no_hand_pose");
    if (stft.count("no_synthetic_view"))
        v.synthetic_view_degrades = median(stft["no_synthetic_view"]) > 0 || median(env["no_synthetic_view"]) > 0 ||
                                    median(all["no_synthetic_view"]) > 0;
    return v;
}

}  // namespace hh::eval

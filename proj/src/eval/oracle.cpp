#include "hh/eval/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hh/dsp/griffin_lim.hpp"
#include "hh/error.hpp"
#include "hh/schema.hpp"
#include "hh/util.hpp"

namespace hh::eval {

using ad::Tensor;
using ad::Var;

namespace {

constexpr const char* kFormat = "hh-oracle";

struct Example {
    Tensor<float> mel;
    int action = 0;
    int material = 0;
};

int label_index(const std::vector<std::string>& names, const std::string& label, const std::string& what) {
    const auto it = std::find(names.begin(), names.end(), label);
    if (it == names.end()) throw ValidationError("unknown " + what + " label '" + label + "'", what);
    return static_cast<int>(it - names.begin());
}

Tensor<float> normalized_mel(const dsp::MelSpectrogram& mel, const dsp::MelNormalizer& norm) {
    const int t = mel.n_frames(), m = mel.n_mels();
    Tensor<float> x({m, t});
    for (int i = 0; i < t; ++i)
        for (int k = 0; k < m; ++k) x.data[static_cast<std::size_t>(k) * t + i] = norm.normalize(mel.frames(i, k));
    return x;
}

std::vector<double> softmax(const Tensor<float>& logits) {
    const float mx = *std::max_element(logits.data.begin(), logits.data.end());
    std::vector<double> p(logits.size());
    double z = 0;
    for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(double(logits.data[i]) - mx);
    for (auto& v : p) v /= z;
    return p;
}

int argmax(const std::vector<double>& p) { return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()); }

}  // namespace

void OracleConfig::validate() const {
    OracleConfig tmp;
    from_json(nlohmann::json(*this), tmp);
}

void to_json(nlohmann::json& j, const OracleConfig& c) {
    j = {{"channels", c.channels},
         {"feature_dim", c.feature_dim},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"lr", c.lr},
         {"gate", c.gate},
         {"vocoder_augment", c.vocoder_augment},
         {"griffin_lim_iterations", c.griffin_lim_iterations},
         {"shuffle_labels", c.shuffle_labels},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, OracleConfig& c) {
    OracleConfig out;
    SchemaReader r(j);
    r.integer("channels", out.channels, 1, 4096);
    r.integer("feature_dim", out.feature_dim, 1, 4096);
    r.integer("epochs", out.epochs, 1, 100000);
    r.integer("batch_size", out.batch_size, 1, 100000);
    r.number("lr", out.lr, 0.0, 1.0, true);
    r.number("gate", out.gate, 0.0, 1.0);
    r.boolean("vocoder_augment", out.vocoder_augment);
    r.integer("griffin_lim_iterations", out.griffin_lim_iterations, 1, 10000);
    r.boolean("shuffle_labels", out.shuffle_labels);
    r.uint64("seed", out.seed);
    r.finish();
    c = out;
}

template <typename T>
void init_oracle(ad::ParamStore<T>& store, int n_mels, int n_actions, int n_materials, const OracleConfig& cfg,
                 std::mt19937_64& rng) {
    ad::init_conv1d(store, "oracle/conv0", n_mels, cfg.channels, 5, rng);
    ad::init_conv1d(store, "oracle/conv1", cfg.channels, cfg.channels, 5, rng);
    ad::init_conv1d(store, "oracle/conv2", cfg.channels, cfg.feature_dim, 5, rng);
    ad::init_linear(store, "oracle/action", cfg.feature_dim, n_actions, rng);
    ad::init_linear(store, "oracle/material", cfg.feature_dim, n_materials, rng);
}

template <typename T>
OracleOutputs<T> oracle_forward(ad::Tape<T>& tape, ad::ParamStore<T>& store, Var<T> mel) {
    Var<T> h = ad::silu(ad::conv1d_layer(tape, store, "oracle/conv0", mel, 1, 2));
    h = ad::silu(ad::conv1d_layer(tape, store, "oracle/conv1", h, 2, 2));
    h = ad::silu(ad::conv1d_layer(tape, store, "oracle/conv2", h, 2, 2));
    const Var<T> features = ad::mean_axis(h, 1);
    return {features, ad::linear_layer(tape, store, "oracle/action", features),
            ad::linear_layer(tape, store, "oracle/material", features)};
}

template void init_oracle(ad::ParamStore<float>&, int, int, int, const OracleConfig&, std::mt19937_64&);
template void init_oracle(ad::ParamStore<double>&, int, int, int, const OracleConfig&, std::mt19937_64&);
template OracleOutputs<float> oracle_forward(ad::Tape<float>&, ad::ParamStore<float>&, Var<float>);
template OracleOutputs<double> oracle_forward(ad::Tape<double>&, ad::ParamStore<double>&, Var<double>);

OraclePrediction OracleClassifier::predict_mel(const dsp::MelSpectrogram& mel) {
    if (mel.fingerprint != dsp.fingerprint())
        throw ValidationError("mel spectrogram was computed under a different DSP config than the classifier's");
    // The strided convolutions need a handful of frames.
    if (mel.n_frames() < 5) throw ValidationError("clip too short to classify (" + std::to_string(mel.n_frames()) + " frames)");
    ad::Tape<float> tape(false);
    const auto out = oracle_forward(tape, params, tape.constant(normalized_mel(mel, norm)));
    OraclePrediction p;
    p.action_probs = softmax(out.action_logits.value());
    p.material_probs = softmax(out.material_logits.value());
    p.action = argmax(p.action_probs);
    p.material = argmax(p.material_probs);
    p.features.assign(out.features.value().data.begin(), out.features.value().data.end());
    return p;
}

OraclePrediction OracleClassifier::predict(const dsp::Waveform& w) {
    if (w.sample_rate != dsp.sample_rate)
        throw ValidationError("waveform is at " + std::to_string(w.sample_rate) + " Hz but the classifier expects " +
                              std::to_string(dsp.sample_rate) + " Hz");
    return predict_mel(dsp::waveform_to_mel(w, dsp));
}

bool OracleClassifier::passes_gate() const {
    return n_heldout > 0 && action_accuracy >= config.gate && material_accuracy >= config.gate;
}

void OracleClassifier::require_gate() const {
    if (n_heldout == 0) throw EvaluationError("oracle classifier has no held-out accuracy; evaluation refused");
    for (const auto& [head, acc] : {std::pair{"action", action_accuracy}, std::pair{"material", material_accuracy}})
        if (acc < config.gate)
            throw EvaluationError(std::string("oracle classifier ") + head + " accuracy " + std::to_string(acc) +
                                  " is below the " + std::to_string(config.gate) + " gate; agreement metrics would be meaningless");
}

std::string OracleClassifier::hash() const {
    std::uint64_t h = fnv1a(to_checkpoint().metadata.dump());
    for (const auto& [name, p] : params.items())
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(p.value.data.data()), p.value.data.size() * sizeof(float)), h);
    return hex64(h);
}

ad::Checkpoint OracleClassifier::to_checkpoint() const {
    ad::Checkpoint ckpt;
    ckpt.metadata = {{"format", kFormat},
                     {"config", config},
                     {"dsp", dsp},
                     {"mel_min", norm.min},
                     {"mel_max", norm.max},
                     {"actions", actions},
                     {"materials", materials},
                     {"action_accuracy", action_accuracy},
                     {"material_accuracy", material_accuracy},
                     {"n_heldout", n_heldout}};
    ad::store_params(ckpt, params);
    return ckpt;
}

OracleClassifier OracleClassifier::from_checkpoint(const ad::Checkpoint& ckpt) {
    const auto& md = ckpt.metadata;
    if (md.value("format", std::string()) != kFormat) throw IncompatibleError("checkpoint does not hold an oracle classifier");
    OracleClassifier c;
    try {
        md.at("config").get_to(c.config);
        md.at("dsp").get_to(c.dsp);
        c.norm = {md.at("mel_min").get<float>(), md.at("mel_max").get<float>()};
        md.at("actions").get_to(c.actions);
        md.at("materials").get_to(c.materials);
        c.action_accuracy = md.at("action_accuracy").get<double>();
        c.material_accuracy = md.at("material_accuracy").get<double>();
        c.n_heldout = md.at("n_heldout").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw IncompatibleError(std::string("oracle checkpoint metadata is malformed: ") + e.what());
    }
    std::mt19937_64 rng(0);
    init_oracle(c.params, c.dsp.n_mels, int(c.actions.size()), int(c.materials.size()), c.config, rng);
    ad::restore_params(ckpt, c.params);
    return c;
}

void OracleClassifier::save(const std::filesystem::path& path) const { ad::save_checkpoint(path, to_checkpoint()); }

OracleClassifier OracleClassifier::load(const std::filesystem::path& path) {
    return from_checkpoint(ad::load_checkpoint(path));
}

OracleClassifier fit_oracle(const sim::DatasetManifest& manifest, const OracleConfig& cfg) {
    cfg.validate();
    OracleClassifier clf;
    clf.config = cfg;
    clf.dsp = manifest.config.dsp;
    clf.norm = {manifest.mel_min, manifest.mel_max};
    if (!clf.norm.valid()) throw ConfigError("dataset manifest has no usable mel normalization stats");
    clf.actions = manifest.config.gestures;
    clf.materials = manifest.config.materials;

    std::vector<Example> train;
    for (const auto* e : manifest.split("train", true)) {
        const auto mel = dsp::waveform_to_mel(sim::load_clip_audio(manifest, *e), clf.dsp);
        const int a = label_index(clf.actions, e->action_label, "action");
        const int m = label_index(clf.materials, e->material_label, "material");
        train.push_back({normalized_mel(mel, clf.norm), a, m});
        if (cfg.vocoder_augment) {
            const auto resynth = dsp::griffin_lim(mel, clf.dsp, cfg.griffin_lim_iterations);
            train.push_back({normalized_mel(dsp::waveform_to_mel(resynth, clf.dsp), clf.norm), a, m});
        }
    }
    if (train.empty()) throw ValidationError("dataset has no training clips for the oracle classifier");
    if (cfg.shuffle_labels) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 0x5f1));
        std::vector<std::size_t> perm(train.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::pair<int, int>> labels;
        for (auto i : perm) labels.emplace_back(train[i].action, train[i].material);
        for (std::size_t i = 0; i < train.size(); ++i) std::tie(train[i].action, train[i].material) = labels[i];
    }

    std::mt19937_64 init(derive_seed(cfg.seed, 0x0c1));
    init_oracle(clf.params, clf.dsp.n_mels, int(clf.actions.size()), int(clf.materials.size()), cfg, init);
    ad::AdamState<float> adam;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), b + cfg.batch_size);
            const float inv = 1.0f / float(end - b);
            clf.params.zero_grad();
            for (std::size_t i = b; i < end; ++i) {
                const auto& ex = train[order[i]];
                ad::Tape<float> tape;
                const auto out = oracle_forward(tape, clf.params, tape.constant(ex.mel));
                const auto loss = ad::scale(ad::add(ad::softmax_cross_entropy(out.action_logits, ex.action),
                                                    ad::softmax_cross_entropy(out.material_logits, ex.material)),
                                            inv);
                tape.backward(loss);
            }
            ad::adam_step(clf.params, adam, cfg.lr);
        }
    }

    int hits_a = 0, hits_m = 0, n = 0;
    for (const char* split : {"val", "test"})
        for (const auto* e : manifest.split(split, true)) {
            const auto p = clf.predict(sim::load_clip_audio(manifest, *e));
            hits_a += p.action == label_index(clf.actions, e->action_label, "action");
            hits_m += p.material == label_index(clf.materials, e->material_label, "material");
            ++n;
        }
    clf.n_heldout = n;
    clf.action_accuracy = n ? double(hits_a) / n : 0.0;
    clf.material_accuracy = n ? double(hits_m) / n : 0.0;
    return clf;
}

OracleClassifier train_oracle_classifier(const sim::DatasetManifest& manifest, const OracleConfig& cfg) {
    auto clf = fit_oracle(manifest, cfg);
    clf.require_gate();
    return clf;
}

}  // namespace hh::eval

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "../support/signals.hpp"
#include "../support/temp_dir.hpp"
#include "hh/ad/grad_check.hpp"
#include "hh/error.hpp"
#include "hh/eval/evaluate.hpp"
#include "hh/eval/metrics.hpp"
#include "hh/util.hpp"

using namespace hh;
using namespace hh::eval;
using hh::fixtures::temp_dir;

namespace {

dsp::Waveform silence(std::size_t n, int sr) {
    dsp::Waveform w;
    w.sample_rate = sr;
    w.samples.assign(n, 0.0f);
    return w;
}

dsp::Waveform noise(std::size_t n, int sr, std::uint64_t seed, double amp = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, amp);
    auto w = silence(n, sr);
    for (auto& v : w.samples) v = static_cast<float>(g(rng));
    return w;
}

/// Direct-DFT log-magnitude distance with reflect padding and a periodic Hann window.
double brute_stft_distance(const dsp::Waveform& a, const dsp::Waveform& b, const dsp::DspConfig& cfg) {
    auto logmag = [&](const dsp::Waveform& w) {
        const long n = long(w.samples.size()), pad = cfg.n_fft / 2;
        auto at = [&](long i) {
            i -= pad;
            while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
            return double(w.samples[i]);
        };
        std::vector<double> out;
        for (long t = 0; t < n / cfg.hop + 1; ++t)
            for (int k = 0; k <= cfg.n_fft / 2; ++k) {
                std::complex<double> acc = 0;
                for (int i = 0; i < cfg.n_fft; ++i) {
                    const double win = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / cfg.n_fft);
                    acc += at(t * cfg.hop + i) * win * std::polar(1.0, -2 * std::numbers::pi * k * i / cfg.n_fft);
                }
                out.push_back(std::log(std::max(std::abs(acc), cfg.log_floor)));
            }
        return out;
    };
    const auto la = logmag(a), lb = logmag(b);
    double s = 0;
    for (std::size_t i = 0; i < la.size(); ++i) s += (la[i] - lb[i]) * (la[i] - lb[i]);
    return std::sqrt(s / double(la.size()));
}

Matrix<double> rows(std::initializer_list<std::vector<double>> r) {
    Matrix<double> m(int(r.size()), int(r.begin()->size()));
    int i = 0;
    for (const auto& row : r) {
        for (int c = 0; c < m.cols; ++c) m(i, c) = row[c];
        ++i;
    }
    return m;
}

void fit2(const Matrix<double>& x, double mu[2], double s[3]) {
    mu[0] = mu[1] = s[0] = s[1] = s[2] = 0;
    for (int r = 0; r < x.rows; ++r) mu[0] += x(r, 0) / x.rows, mu[1] += x(r, 1) / x.rows;
    for (int r = 0; r < x.rows; ++r) {
        const double a = x(r, 0) - mu[0], b = x(r, 1) - mu[1];
        s[0] += a * a / (x.rows - 1), s[1] += b * b / (x.rows - 1), s[2] += a * b / (x.rows - 1);
    }
}

MetricReport report(const std::string& variant, std::uint64_t seed, double material, double action, double stft = 1.0) {
    MetricReport r;
    r.variant = variant;
    r.seed = seed;
    r.label_agreement_material = material;
    r.label_agreement_action = action;
    r.label_agreement_all = std::min(material, action);
    r.stft_l2 = stft;
    r.envelope_l2 = 0.1;
    r.score_entropy = 2.0;
    return r;
}

}  // namespace

TEST(StftDistance, ZeroOnIdenticalAndSymmetric) {
    const auto cfg = dsp::DspConfig::desk();
    const auto a = noise(2000, 8000, 1), b = noise(2000, 8000, 2);
    EXPECT_EQ(stft_distance(a, a, cfg), 0.0);
    EXPECT_DOUBLE_EQ(stft_distance(a, b, cfg), stft_distance(b, a, cfg));
    EXPECT_GT(stft_distance(a, b, cfg), 0.0);
}

TEST(StftDistance, SilenceVersusSineMatchesDirectDft) {
    const auto cfg = dsp::DspConfig::desk();
    const auto s = fixtures::sine(440.0, 1.0, 0.1, 8000);
    const auto z = silence(s.samples.size(), 8000);
    EXPECT_NEAR(stft_distance(z, s, cfg), brute_stft_distance(z, s, cfg), 1e-6);
}

TEST(StftDistance, LengthMismatchIsValidationError) {
    const auto cfg = dsp::DspConfig::desk();
    EXPECT_THROW(stft_distance(noise(1000, 8000, 1), noise(1001, 8000, 1), cfg), ValidationError);
}

TEST(EnvelopeDistance, ImpulseVersusSilencePlateau) {
    auto imp = silence(8000, 8000);
    imp.samples[4000] = 1.0f;
    // 10 ms at 8 kHz is an 80-sample box: 80 samples at 1/80, the rest zero.
    EXPECT_NEAR(envelope_distance(imp, silence(8000, 8000), 10.0), std::sqrt(80.0 / (80.0 * 80.0) / 8000.0), 1e-9);
    const auto a = noise(4000, 8000, 3), b = noise(4000, 8000, 4);
    EXPECT_EQ(envelope_distance(a, a), 0.0);
    EXPECT_DOUBLE_EQ(envelope_distance(a, b), envelope_distance(b, a));
    EXPECT_THROW(envelope_distance(a, noise(10, 8000, 1)), ValidationError);
}

TEST(Frechet, SelfIsZero) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Matrix<double> x(40, 6);
    for (auto& v : x.data) v = g(rng);
    EXPECT_NEAR(frechet_distance(x, x, 7), 0.0, 1e-6);
}

TEST(Frechet, PointMassesGiveSquaredDistance) {
    const auto a = rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
    const auto b = rows({{0, 0, 1}, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}});
    EXPECT_NEAR(frechet_distance(a, b, 4), 1 + 4 + 4, 1e-9);
}

TEST(Frechet, MatchesClosedFormInTwoDimensions) {
    // For 2x2 SPD A, B: tr sqrt(AB) = sqrt(tr(AB) + 2 sqrt(det(AB))).
    const auto a = rows({{0.3, 1.2}, {-1.1, 0.4}, {2.0, -0.5}, {0.1, 0.9}, {-0.7, -1.3}});
    const auto b = rows({{1.5, 0.2}, {0.6, 2.1}, {-0.4, 0.8}, {2.2, 1.9}, {0.9, -0.6}, {1.1, 0.3}});
    double ma[2], mb[2], sa[3], sb[3];
    fit2(a, ma, sa);
    fit2(b, mb, sb);
    const double ab00 = sa[0] * sb[0] + sa[2] * sb[2], ab11 = sa[2] * sb[2] + sa[1] * sb[1];
    const double det = (sa[0] * sa[1] - sa[2] * sa[2]) * (sb[0] * sb[1] - sb[2] * sb[2]);
    const double tr_sqrt = std::sqrt(ab00 + ab11 + 2 * std::sqrt(det));
    const double want = (ma[0] - mb[0]) * (ma[0] - mb[0]) + (ma[1] - mb[1]) * (ma[1] - mb[1]) + sa[0] + sa[1] + sb[0] +
                        sb[1] - 2 * tr_sqrt;
    EXPECT_NEAR(frechet_distance(a, b, 3), want, 1e-8);
    EXPECT_NEAR(frechet_distance(a, b, 3), frechet_distance(b, a, 3), 1e-10);
}

TEST(Frechet, TooFewSamplesIsValidationError) {
    EXPECT_THROW(frechet_distance(rows({{1, 2}, {3, 4}}), rows({{1, 2}, {3, 4}, {5, 6}}), 3), ValidationError);
}

TEST(ScoreEntropy, Extremes) {
    Matrix<double> same(5, 13, 1.0 / 13);
    EXPECT_NEAR(score_entropy(same), 1.0, 1e-12);
    Matrix<double> perfect(26, 13, 0.0);
    for (int r = 0; r < 26; ++r) perfect(r, r % 13) = 1.0;
    EXPECT_NEAR(score_entropy(perfect), 13.0, 1e-9);
}

TEST(ScoreEntropy, MatchesEntropyIdentityOnTenClips) {
    // E KL(p_i || p) = H(p) - mean H(p_i).
    std::mt19937_64 rng(8);
    std::gamma_distribution<double> g(0.7, 1.0);
    Matrix<double> p(10, 4);
    for (int r = 0; r < 10; ++r) {
        double z = 0;
        for (int c = 0; c < 4; ++c) z += p(r, c) = g(rng);
        for (int c = 0; c < 4; ++c) p(r, c) /= z;
    }
    double h_mean = 0, h_marg = 0;
    for (int c = 0; c < 4; ++c) {
        double m = 0;
        for (int r = 0; r < 10; ++r) m += p(r, c) / 10;
        h_marg -= m * std::log(m);
    }
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 4; ++c) h_mean -= p(r, c) * std::log(p(r, c)) / 10;
    EXPECT_NEAR(score_entropy(p), std::exp(h_marg - h_mean), 1e-9);
}

TEST(EnvelopeLag, RecoversShift) {
    auto a = silence(8000, 8000), b = silence(8000, 8000);
    for (int i = 0; i < 200; ++i) {
        const float v = float(std::exp(-i / 40.0) * std::sin(0.9 * i));
        a.samples[3000 + i] = v;
        b.samples[3000 + 160 + i] = v;
    }
    EXPECT_NEAR(envelope_lag(a, b, 10.0, 0.5), 0.02, 1.0 / 8000);
    EXPECT_NEAR(envelope_lag(b, a, 10.0, 0.5), -0.02, 1.0 / 8000);
}

TEST(ValueWasserstein, ShiftAndPermutation) {
    EXPECT_NEAR(value_wasserstein({1, 2, 3}, {3, 1, 2}), 0.0, 1e-12);
    EXPECT_NEAR(value_wasserstein({0, 1, 2}, {0.5f, 1.5f, 2.5f}), 0.5, 1e-7);
    EXPECT_THROW(value_wasserstein({1}, {1, 2}), ValidationError);
}

TEST(Report, JsonRoundTripAndValidation) {
    auto r = report("full", 3, 0.75, 0.5);
    r.model_hash = "m";
    r.oracle_hash = "o";
    const MetricReport back = nlohmann::json(r).get<MetricReport>();
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(r));
    r.validate();
    r.label_agreement_action = 1.5;
    EXPECT_THROW(r.validate(), ValidationError);
    r = report("full", 0, 0.5, 0.5);
    r.stft_l2 = -1;
    EXPECT_THROW(r.validate(), ValidationError);
}

TEST(Report, CsvAndAlignedTable) {
    const std::vector<MetricReport> rs = {report("full", 0, 0.75, 0.5), report("no_visual", 0, 0.25, 0.5)};
    const auto csv = reports_csv(rs);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "variant,seed,n_clips,stft_l2,envelope_l2,frechet,score_entropy,agree_all,agree_action,agree_material");
    EXPECT_NE(csv.find("no_visual,0,0,1.0000"), std::string::npos);
    const auto table = reports_table(rs);
    std::vector<std::size_t> widths;
    std::size_t start = 0;
    for (std::size_t nl; (nl = table.find('\n', start)) != std::string::npos; start = nl + 1) widths.push_back(nl - start);
    ASSERT_EQ(widths.size(), 3u);
    EXPECT_EQ(widths[0], widths[1]);
    EXPECT_EQ(widths[1], widths[2]);
}

TEST(Ablation, VerdictUsesMediansOverSeeds) {
    std::vector<MetricReport> rs;
    for (std::uint64_t s = 0; s < 3; ++s) {
        rs.push_back(report("full", s, 0.8, 0.8, 1.0));
        rs.push_back(report("no_visual", s, s == 2 ? 0.9 : 0.3, 0.7, 1.0));
        rs.push_back(report("no_hand_pose", s, 0.6, s == 0 ? 0.9 : 0.4, 1.0));
        rs.push_back(report("no_synthetic_view", s, 0.7, 0.6, 1.1));
    }
    const auto v = ablation_verdict(rs);
    EXPECT_NEAR(v.material_drop.at("no_visual"), 0.5, 1e-12);
    EXPECT_NEAR(v.action_drop.at("no_hand_pose"), 0.4, 1e-12);
    EXPECT_TRUE(v.visual_drops_material_most);
    EXPECT_TRUE(v.hand_pose_drops_action_most);
    EXPECT_TRUE(v.synthetic_view_degrades);

    rs[3].label_agreement_action = 0.1;  // no_synthetic_view seed 0
    rs[7].label_agreement_action = 0.1;  // seed 1
    EXPECT_FALSE(ablation_verdict(rs).hand_pose_drops_action_most);
    EXPECT_THROW(ablation_verdict({report("no_visual", 0, 0.5, 0.5)}), ValidationError);
}

TEST(Ablation, VariantsAndMissingCheckpoints) {
    flow::ModelConfig m;
    flow::TrainOptions o;
    apply_variant("no_visual", m, o);
    EXPECT_FALSE(m.cond.use_visual);
    apply_variant("no_hand_pose", m, o);
    EXPECT_FALSE(m.cond.use_action);
    apply_variant("no_synthetic_view", m, o);
    EXPECT_TRUE(o.front_only);
    EXPECT_THROW(apply_variant("no_audio", m, o), ConfigError);
    EXPECT_EQ(ablation_checkpoint("d", "full", 2), std::filesystem::path("d/full_s2.ckpt"));
}

class OracleFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        auto cfg = sim::DatasetConfig::desk();
        cfg.n_scenes = 5;
        cfg.clips_per_scene = 24;
        cfg.seed = 11;
        cfg.augment_views = false;
        dir_ = temp_dir("eval_ds");
        manifest_ = sim::generate_dataset(cfg, dir_);
        OracleConfig oc;
        oc.epochs = 12;
        oc.feature_dim = 16;
        clf_ = fit_oracle(manifest_, oc);
    }
    static void TearDownTestSuite() { std::filesystem::remove_all(dir_); }

    static std::filesystem::path dir_;
    static sim::DatasetManifest manifest_;
    static OracleClassifier clf_;
};
std::filesystem::path OracleFixture::dir_;
sim::DatasetManifest OracleFixture::manifest_;
OracleClassifier OracleFixture::clf_;

// The 90% gate is checked on the full desk dataset by the acceptance run; this fixture trains on
// 48 clips for a few seconds, so it only has to beat chance clearly.
TEST_F(OracleFixture, LearnsHeldOutLabels) {
    EXPECT_EQ(clf_.n_heldout, 48);
    EXPECT_GE(clf_.action_accuracy, 0.7);
    EXPECT_GE(clf_.material_accuracy, 0.6);
}

TEST_F(OracleFixture, ShuffledLabelsFallToChanceAndTripTheGate) {
    OracleConfig oc;
    oc.epochs = 12;
    oc.shuffle_labels = true;
    oc.vocoder_augment = false;
    const auto c = fit_oracle(manifest_, oc);
    EXPECT_LT(c.action_accuracy, 0.6);
    EXPECT_LT(c.material_accuracy, 0.55);
    EXPECT_FALSE(c.passes_gate());
    EXPECT_THROW(c.require_gate(), EvaluationError);
    EXPECT_THROW(train_oracle_classifier(manifest_, oc), EvaluationError);
}

TEST_F(OracleFixture, DeterministicInSeed) {
    OracleConfig oc;
    oc.epochs = 2;
    oc.vocoder_augment = false;
    EXPECT_EQ(fit_oracle(manifest_, oc).hash(), fit_oracle(manifest_, oc).hash());
    oc.seed = 1;
    EXPECT_NE(fit_oracle(manifest_, oc).hash(), clf_.hash());
}

TEST_F(OracleFixture, CheckpointRoundTrip) {
    const auto dir = temp_dir("oracle_ckpt");
    std::filesystem::create_directories(dir);
    clf_.save(dir / "o.ckpt");
    auto back = OracleClassifier::load(dir / "o.ckpt");
    EXPECT_EQ(back.hash(), clf_.hash());
    const auto w = sim::load_clip_audio(manifest_, *manifest_.split("test")[0]);
    EXPECT_EQ(back.predict(w).material_probs, clf_.predict(w).material_probs);
    std::filesystem::remove_all(dir);
}

TEST_F(OracleFixture, AgreementIdentityAndNoise) {
    std::vector<std::pair<dsp::Waveform, dsp::Waveform>> same, vs_noise;
    for (const auto* e : manifest_.split("test")) {
        const auto w = sim::load_clip_audio(manifest_, *e);
        same.emplace_back(w, w);
        vs_noise.emplace_back(w, noise(w.samples.size(), w.sample_rate, fnv1a(e->clip_id), 0.1));
    }
    const auto a = label_agreement(same, clf_);
    EXPECT_EQ(a.all, 1.0);
    EXPECT_EQ(a.action, 1.0);
    EXPECT_EQ(a.material, 1.0);
    // Noise gets one label whatever the clip: agreement is the share of that label.
    const auto n = label_agreement(vs_noise, clf_);
    EXPECT_LE(n.all, std::min(n.action, n.material));
    EXPECT_LT(n.action, 0.6);
    EXPECT_LT(n.material, 0.55);
    EXPECT_LT(n.all, 0.3);
}

TEST_F(OracleFixture, ClassifierGradients) {
    ad::ParamStore<double> store;
    std::mt19937_64 rng(3);
    OracleConfig oc;
    oc.channels = 4;
    oc.feature_dim = 3;
    init_oracle(store, 5, 3, 4, oc, rng);
    ad::Tensor<double> mel({5, 17});
    std::normal_distribution<double> g;
    for (auto& v : mel.data) v = g(rng);
    const auto r = ad::grad_check(
        [&](ad::Tape<double>& tape, ad::ParamStore<double>& s) {
            const auto out = oracle_forward(tape, s, tape.constant(mel));
            return ad::add(ad::softmax_cross_entropy(out.action_logits, 1), ad::softmax_cross_entropy(out.material_logits, 3));
        },
        store, 1e-4, 300, 4);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
}

TEST_F(OracleFixture, SetMetricsOnOracleSounds) {
    std::vector<dsp::Waveform> test;
    for (const auto* e : manifest_.split("test")) test.push_back(sim::load_clip_audio(manifest_, *e));
    EXPECT_NEAR(frechet_feature_distance(test, test, clf_), 0.0, 1e-6);
    EXPECT_THROW(frechet_feature_distance({test[0]}, test, clf_), ValidationError);
    const double is = score_entropy(test, clf_);
    EXPECT_GE(is, 1.0);
    EXPECT_LE(is, double(clf_.materials.size()) + 1e-9);
}

TEST_F(OracleFixture, EvaluationIsDeterministicAndGated) {
    auto mcfg = flow::ModelConfig::desk();
    mcfg.vf.base_channels = 8;
    mcfg.vf.groups = 4;
    auto model = flow::FlowModel::create(mcfg, manifest_.config, dsp::MelNormalizer{manifest_.mel_min, manifest_.mel_max}, 2);
    OracleClassifier small = clf_;
    // Pretend the fixture classifier passed its gate; the gate itself is checked at the end.
    small.action_accuracy = small.material_accuracy = 1.0;
    EvalOptions o;
    o.max_clips = 4;
    o.sample.steps = 2;
    o.sample.griffin_lim_iterations = 4;
    // Four clips cannot support a 16-wide feature covariance.
    EXPECT_THROW(evaluate(model, manifest_, small, o), ValidationError);
    o.max_clips = 0;
    const auto a = evaluate(model, manifest_, small, o), b = evaluate(model, manifest_, small, o);
    EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
    EXPECT_EQ(a.n_clips, 24);
    EXPECT_EQ(a.oracle_hash, small.hash());
    small.action_accuracy = 0.5;
    EXPECT_THROW(evaluate(model, manifest_, small, o), EvaluationError);
}

TEST_F(OracleFixture, SingleTapProbesAreSingleTaps) {
    const auto probes = single_tap_probes(manifest_, "test", 10);
    ASSERT_GE(probes.size(), 10u);
    const auto again = single_tap_probes(manifest_, "test", 10);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto events = sim::detect_contacts(probes[i].scene, probes[i].trajectory);
        ASSERT_EQ(events.size(), 1u) << probes[i].clip_id;
        EXPECT_EQ(events[0].kind, sim::ContactKind::tap);
        EXPECT_EQ(probes[i].truth.samples, again[i].truth.samples);
        EXPECT_EQ(probes[i].scene.id.substr(0, 6), "scene_");
    }
}

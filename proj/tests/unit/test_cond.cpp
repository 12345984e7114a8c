#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hh/ad/grad_check.hpp"
#include "hh/cond/conditioning.hpp"
#include "hh/dsp/types.hpp"
#include "hh/error.hpp"
#include "hh/sim/dataset.hpp"

using namespace hh;
using namespace hh::cond;
using ad::Tensor;
using ad::Var;

namespace {

sim::HandTrajectory random_trajectory(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    sim::HandTrajectory t;
    t.poses.resize(n);
    for (auto& p : t.poses) {
        p.presence = {true, true};
        for (auto& hand : p.keypoints)
            for (auto& k : hand)
                for (auto& v : k) v = u(rng);
    }
    return t;
}

template <typename T>
Tensor<T> random_view(int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor<T> t({3, size, size});
    for (auto& v : t.data) v = static_cast<T>(u(rng));
    return t;
}

double column_norm(const Tensor<float>& x, int c) {
    const int n = x.dim(1);
    double s = 0;
    for (int r = 0; r < x.dim(0); ++r) s += double(x.data[r * n + c]) * x.data[r * n + c];
    return std::sqrt(s);
}

ad::ParamStore<float> store_for(const CondConfig& cfg, std::uint64_t seed = 3) {
    ad::ParamStore<float> s;
    std::mt19937_64 rng(seed);
    init_conditioning(s, cfg, rng);
    return s;
}

struct Fixture {
    sim::DatasetConfig data = sim::DatasetConfig::desk();
    sim::SceneModel scene = sim::scene_for(data, 42);

    ClipConditioningInput<float> clip(std::uint64_t seed, double duration = 2.0, sim::Gesture g = sim::Gesture::tap) const {
        const auto traj = sim::sample_trajectory(scene, g, seed, duration);
        return prepare_inputs<float>(traj, sim::render_clip_views(scene, traj, sim::ViewId::front, 4.0));
    }
};

bool differs(const Tensor<float>& a, const Tensor<float>& b, float tol = 1e-6f) {
    if (a.shape != b.shape) return true;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a.data[i] - b.data[i]) > tol) return true;
    return false;
}

}  // namespace

TEST(EncodeAction, NonzeroFramesHaveUnitNorm) {
    CondConfig cfg;
    auto store = store_for(cfg);
    ad::Tape<float> tape(false);
    const auto out = encode_action(tape, store, cfg, pose_matrix<float>(random_trajectory(60, 1))).value();
    ASSERT_EQ(out.shape, (ad::Shape{cfg.embed_dim, 60}));
    for (int c = 0; c < 60; ++c) EXPECT_NEAR(column_norm(out, c), 1.0, 1e-6);
}

TEST(EncodeAction, AbsentHandsGiveZeroRow) {
    CondConfig cfg;
    auto store = store_for(cfg);
    auto traj = random_trajectory(10, 2);
    traj.poses[4] = sim::HandPose{};
    ad::Tape<float> tape(false);
    const auto out = encode_action(tape, store, cfg, pose_matrix<float>(traj)).value();
    EXPECT_EQ(column_norm(out, 4), 0.0);
    EXPECT_NEAR(column_norm(out, 3), 1.0, 1e-6);
}

TEST(EncodeAction, TwoSecondsGiveSixtyRows) {
    Fixture f;
    CondConfig cfg;
    auto store = store_for(cfg);
    ad::Tape<float> tape(false);
    EXPECT_EQ(encode_action(tape, store, cfg, f.clip(5).poses).shape()[1], 60);
}

TEST(EncodeAction, WrongPoseWidthIsConfigError) {
    CondConfig cfg;
    auto store = store_for(cfg);
    ad::Tape<float> tape(false);
    EXPECT_THROW(encode_action(tape, store, cfg, Tensor<float>({125, 4})), ConfigError);
}

TEST(EncodeFrames, EightSecondsGiveThirtyTwoRows) {
    Fixture f;
    CondConfig cfg;
    auto store = store_for(cfg);
    const auto in = f.clip(7, 8.0);
    ASSERT_EQ(in.global_views.size(), 32u);
    ad::Tape<float> tape(false);
    const auto out = encode_frames(tape, store, cfg, in.global_views, in.local_views).value();
    EXPECT_EQ(out.shape, (ad::Shape{cfg.embed_dim, 32}));
}

TEST(EncodeFrames, IdenticalViewsGiveIdenticalRows) {
    CondConfig cfg;
    auto store = store_for(cfg);
    const auto g = random_view<float>(32, 1), l = random_view<float>(16, 2);
    ad::Tape<float> tape(false);
    const auto out = encode_frames(tape, store, cfg, {g, g}, {l, l}).value();
    for (int r = 0; r < cfg.embed_dim; ++r) EXPECT_EQ(out.data[r * 2], out.data[r * 2 + 1]);
}

TEST(EncodeFrames, SwappingGlobalAndLocalChangesOutput) {
    CondConfig cfg;
    auto store = store_for(cfg);
    const auto a = random_view<float>(32, 1), b = random_view<float>(32, 2);
    ad::Tape<float> tape(false);
    const auto ab = encode_frames(tape, store, cfg, {a}, {b}).value();
    const auto ba = encode_frames(tape, store, cfg, {b}, {a}).value();
    EXPECT_TRUE(differs(ab, ba));
}

TEST(EncodeFrames, MismatchedCountsAreValidationErrors) {
    CondConfig cfg;
    auto store = store_for(cfg);
    ad::Tape<float> tape(false);
    const auto g = random_view<float>(32, 1);
    EXPECT_THROW(encode_frames(tape, store, cfg, {g, g}, {g}), ValidationError);
    EXPECT_THROW(encode_frames(tape, store, cfg, {Tensor<float>({3, 8, 8})}, {Tensor<float>({3, 8, 8})}), ValidationError);
}

TEST(Fuse, ConstantStreamsSum) {
    CondConfig cfg;
    cfg.embed_dim = 4;
    ad::Tape<float> tape(false);
    const Tensor<float> u({4, 8}, 0.25f), v({4, 60}, -2.0f);
    const auto out = fuse(tape, cfg, tape.constant(u), tape.constant(v), 126, 62.5).value();
    ASSERT_EQ(out.shape, (ad::Shape{4, 126}));
    for (float x : out.data) EXPECT_FLOAT_EQ(x, -1.75f);
}

TEST(Fuse, NearestIndicesMatchBruteForceOn501Frames) {
    for (const auto& [n_in, r_in] : {std::pair{32, 4.0}, std::pair{240, 30.0}}) {
        const auto idx = nearest_indices(501, 62.5, n_in, r_in);
        ASSERT_EQ(idx.size(), 501u);
        for (int j = 0; j < 501; ++j) {
            int best = 0;
            long double best_d = 1e30L;
            for (int i = 0; i < n_in; ++i) {
                const long double d = std::fabs((long double)i / r_in - (long double)j / 62.5L);
                if (d < best_d) best = i, best_d = d;
            }
            EXPECT_EQ(idx[j], best) << "frame " << j << " from " << n_in;
        }
    }
}

TEST(Fuse, EqualRatesPassActionsThrough) {
    CondConfig cfg;
    cfg.embed_dim = 3;
    std::mt19937_64 rng(4);
    std::normal_distribution<float> g;
    Tensor<float> a({3, 45});
    for (auto& v : a.data) v = g(rng);
    ad::Tape<float> tape(false);
    const auto out = fuse(tape, cfg, Var<float>{}, tape.constant(a), 45, 30.0).value();
    EXPECT_EQ(out, a);
}

TEST(Fuse, DurationMismatchIsValidationError) {
    CondConfig cfg;
    cfg.embed_dim = 2;
    ad::Tape<float> tape(false);
    EXPECT_THROW(fuse(tape, cfg, Var<float>{}, tape.constant(Tensor<float>({2, 30})), 126, 62.5), ValidationError);
    EXPECT_THROW(fuse(tape, cfg, tape.constant(Tensor<float>({2, 4})), Var<float>{}, 126, 62.5), ValidationError);
}

TEST(Fuse, OutputLengthMatchesTargetForShippedConfigs) {
    Fixture f;
    CondConfig cfg;
    auto store = store_for(cfg);
    for (const auto& [dsp, duration] : {std::pair{dsp::DspConfig::desk(), 2.0}, std::pair{dsp::DspConfig::reference(), 8.0},
                                        std::pair{dsp::DspConfig::desk(), 1.0}}) {
        const int n_spec = dsp.n_frames(static_cast<std::size_t>(duration * dsp.sample_rate));
        const auto seq = conditioning_sequence(store, cfg, f.clip(11, duration), n_spec, dsp.frame_rate());
        EXPECT_EQ(seq.vectors.rows, n_spec);
        EXPECT_EQ(seq.vectors.cols, cfg.embed_dim);
        for (float v : seq.vectors.data) EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Dropout, ZeroAndOneAreExact) {
    ConditioningSequence c;
    c.vectors = Matrix<float>(3, 2, 1.5f);
    const auto kept = condition_dropout(c, 0.0, 9);
    EXPECT_FALSE(kept.dropout_applied);
    EXPECT_EQ(kept.vectors.data, c.vectors.data);
    const auto dropped = condition_dropout(c, 1.0, 9);
    EXPECT_TRUE(dropped.dropout_applied);
    for (float v : dropped.vectors.data) EXPECT_EQ(v, 0.0f);
}

TEST(Dropout, RateOverTenThousandClips) {
    int n = 0;
    for (std::uint64_t s = 0; s < 10000; ++s) n += dropout_decision(0.1, s);
    EXPECT_GE(n, 800);
    EXPECT_LE(n, 1200);
    EXPECT_EQ(dropout_decision(0.1, 77), dropout_decision(0.1, 77));
}

TEST(Conditioning, PermutingFramesChangesSequence) {
    Fixture f;
    CondConfig cfg;
    auto store = store_for(cfg);
    const auto in = f.clip(13);
    auto rev = in;
    for (int r = 0; r < kPoseDim; ++r) {
        auto* row = rev.poses.data.data() + static_cast<std::size_t>(r) * rev.poses.dim(1);
        std::reverse(row, row + rev.poses.dim(1));
    }
    std::reverse(rev.global_views.begin(), rev.global_views.end());
    std::reverse(rev.local_views.begin(), rev.local_views.end());
    const auto a = conditioning_sequence(store, cfg, in, 126, 62.5), b = conditioning_sequence(store, cfg, rev, 126, 62.5);
    EXPECT_NE(a.vectors.data, b.vectors.data);
}

TEST(Conditioning, GradientsReachBothEncoders) {
    CondConfig cfg;
    cfg.embed_dim = 8;
    cfg.encoder_channels = {2, 3, 2, 2};
    ad::ParamStore<double> store;
    std::mt19937_64 rng(5);
    init_conditioning(store, cfg, rng);
    ClipConditioningInput<double> in;
    in.poses = pose_matrix<double>(random_trajectory(9, 6));
    in.global_views = {random_view<double>(16, 7), random_view<double>(16, 8)};
    in.local_views = {random_view<double>(16, 9), random_view<double>(16, 10)};
    Tensor<double> proj({8, 19});
    std::normal_distribution<double> g;
    for (auto& v : proj.data) v = g(rng);
    const ad::LossFn loss = [&](ad::Tape<double>& tape, ad::ParamStore<double>& s) {
        const auto c = build_conditioning(tape, s, cfg, in, 19, 62.5);
        return ad::sum(ad::mul(c, tape.constant(proj)));
    };
    const auto r = ad::grad_check(loss, store, 1e-4, 400, 1);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;

    store.zero_grad();
    ad::Tape<double> tape;
    tape.backward(loss(tape, store));
    for (const char* name : {"cond/action/w", "cond/view/conv0/w", "cond/view/proj/w"}) {
        double mag = 0;
        for (double v : store.get(name).grad) mag += std::abs(v);
        EXPECT_GT(mag, 0.0) << name;
    }
}

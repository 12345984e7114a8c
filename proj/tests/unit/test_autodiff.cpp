#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "hh/ad/adam.hpp"
#include "hh/ad/checkpoint.hpp"
#include "hh/ad/grad_check.hpp"
#include "hh/ad/nn.hpp"
#include "hh/ad/ops.hpp"
#include "hh/error.hpp"
#include "hh/util.hpp"

using namespace hh::ad;

namespace {

constexpr double kTol = 1e-4;

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = u(rng);
    return t;
}

ParamStore<double> store_of(std::initializer_list<std::pair<const char*, Shape>> specs, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    ParamStore<double> s;
    for (const auto& [name, shape] : specs) s.create(name, shape).value = random_tensor(shape, rng);
    return s;
}

// A fixed random projection turns any output into a scalar with a non-trivial gradient.
Var<double> project(Var<double> y) {
    std::mt19937_64 rng(99);
    auto w = y.tape->constant(random_tensor(y.shape(), rng));
    return sum(mul(y, w));
}

void expect_grads_match(const LossFn& fn, ParamStore<double>& store) {
    const auto r = grad_check(fn, store);
    EXPECT_GT(r.coordinates, 0);
    EXPECT_LT(r.max_rel_error, kTol) << "worst coordinate " << r.worst_param;
}

}  // namespace

TEST(Ops, MatmulIdentity) {
    Tape<double> tape;
    std::mt19937_64 rng(3);
    Tensor<double> eye({4, 4});
    for (int i = 0; i < 4; ++i) eye.data[i * 4 + i] = 1.0;
    auto a = random_tensor({4, 3}, rng);
    auto out = matmul(tape.constant(eye), tape.constant(a));
    EXPECT_EQ(out.value(), a);
}

TEST(Ops, Conv1dUnitKernelIsIdentity) {
    Tape<double> tape;
    std::mt19937_64 rng(4);
    auto x = random_tensor({1, 17}, rng);
    auto out = conv1d(tape.constant(x), tape.constant(Tensor<double>({1, 1, 1}, 1.0)), tape.constant(Tensor<double>({1})));
    EXPECT_EQ(out.value(), x);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
    Tape<double> tape;
    auto a = tape.constant(Tensor<double>({2, 3}));
    auto b = tape.constant(Tensor<double>({4, 5}));
    try {
        matmul(a, b);
        FAIL() << "expected a validation error";
    } catch (const hh::ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("[4x5]"), std::string::npos);
    }
    EXPECT_THROW(add(a, b), hh::ValidationError);
    EXPECT_THROW(add(a, tape.constant(Tensor<double>({1, 3}))), hh::ValidationError);
    EXPECT_NO_THROW(add(a, tape.constant(Tensor<double>({2, 1}))));
}

TEST(Ops, NonFiniteOutputNamesOp) {
    Tape<float> tape;
    auto x = tape.constant(Tensor<float>({2}, 3e38f));
    try {
        scale(x, 10.0f);
        FAIL() << "expected a validation error";
    } catch (const hh::ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("scale"), std::string::npos);
    }
    EXPECT_THROW(Tensor<float>({1}, std::vector<float>{NAN}), hh::ValidationError);
}

TEST(GradCheck, ElementwiseWithBroadcast) {
    auto s = store_of({{"a", {3, 5}}, {"b", {3, 1}}, {"c", {3, 5}}, {"k", {1}}});
    expect_grads_match(
        [](Tape<double>& t, ParamStore<double>& p) {
            auto a = t.param(p.get("a"));
            auto y = mul(add(a, t.param(p.get("b"))), sub(t.param(p.get("c")), t.param(p.get("k"))));
            return project(add(scale(y, 0.7), mul(a, t.param(p.get("b")))));
        },
        s);
}

TEST(GradCheck, MatmulAndAffine) {
    auto s = store_of({{"a", {4, 3}}, {"b", {3, 5}}, {"w", {2, 4}}, {"bias", {2}}});
    expect_grads_match(
        [](Tape<double>& t, ParamStore<double>& p) {
            auto h = matmul(t.param(p.get("a")), t.param(p.get("b")));
            return project(affine(h, t.param(p.get("w")), t.param(p.get("bias"))));
        },
        s);
}

TEST(GradCheck, Conv1dStridedPadded) {
    auto s = store_of({{"x", {3, 11}}, {"w", {4, 3, 3}}, {"b", {4}}});
    for (auto [stride, pad] : {std::pair{1, 1}, {2, 1}, {2, 0}, {3, 2}}) {
        expect_grads_match(
            [=](Tape<double>& t, ParamStore<double>& p) {
                return project(conv1d(t.param(p.get("x")), t.param(p.get("w")), t.param(p.get("b")), stride, pad));
            },
            s);
    }
}

TEST(GradCheck, Conv2dStridedPadded) {
    auto s = store_of({{"x", {2, 7, 6}}, {"w", {3, 2, 3, 3}}, {"b", {3}}});
    for (auto [stride, pad] : {std::pair{1, 1}, {2, 1}}) {
        expect_grads_match(
            [=](Tape<double>& t, ParamStore<double>& p) {
                return project(conv2d(t.param(p.get("x")), t.param(p.get("w")), t.param(p.get("b")), stride, pad));
            },
            s);
    }
}

TEST(GradCheck, SiluAndGroupNorm) {
    auto s = store_of({{"x", {6, 9}}, {"g", {6}}, {"b", {6}}});
    expect_grads_match(
        [](Tape<double>& t, ParamStore<double>& p) {
            auto x = t.param(p.get("x"));
            return project(silu(group_norm(x, t.param(p.get("g")), t.param(p.get("b")), 3)));
        },
        s);
    auto s3 = store_of({{"x", {4, 3, 5}}, {"g", {4}}, {"b", {4}}});
    expect_grads_match(
        [](Tape<double>& t, ParamStore<double>& p) {
            return project(group_norm(t.param(p.get("x")), t.param(p.get("g")), t.param(p.get("b")), 2));
        },
        s3);
}

TEST(GradCheck, ShapeOps) {
    auto s = store_of({{"a", {3, 4}}, {"b", {2, 4}}, {"c", {3, 2}}});
    expect_grads_match(
        [](Tape<double>& t, ParamStore<double>& p) {
            auto a = t.param(p.get("a"));
            auto rows = concat<double>({a, t.param(p.get("b"))}, 0);
            auto cols = concat<double>({a, t.param(p.get("c")), a}, 1);
            auto sl = slice(cols, 1, 2, 5);
            auto r = reshape(slice(rows, 0, 1, 3), {4, 3});
            return add(add(project(sl), project(r)), project(mean_axis(cols, 1)));
        },
        s);
}

TEST(GradCheck, Reductions) {
    auto s = store_of({{"a", {3, 4}}, {"b", {3, 4}}});
    expect_grads_match(
        [](Tape<double>& t, ParamStore<double>& p) {
            auto a = t.param(p.get("a"));
            auto b = t.param(p.get("b"));
            return add(add(mse(a, b), mul(mean(a), sum(b))), project(mean_axis(a, 0)));
        },
        s);
}

TEST(GradCheck, NormalizeAndCrossEntropy) {
    auto s = store_of({{"a", {5, 3}}, {"z", {7}}});
    expect_grads_match(
        [](Tape<double>& t, ParamStore<double>& p) {
            return add(project(l2_normalize_columns(t.param(p.get("a")))),
                       softmax_cross_entropy(t.param(p.get("z")), 2));
        },
        s);
}

TEST(GradCheck, ComposedConvNormSiluMse) {
    std::mt19937_64 rng(5);
    ParamStore<double> s;
    init_conv1d(s, "c1", 3, 8, 3, rng);
    init_group_norm(s, "n1", 8);
    init_conv1d(s, "c2", 8, 3, 3, rng);
    s.create("x", {3, 16}).value = random_tensor({3, 16}, rng);
    const auto target = random_tensor({3, 16}, rng);
    expect_grads_match(
        [&](Tape<double>& t, ParamStore<double>& p) {
            auto h = conv1d_layer(t, p, "c1", t.param(p.get("x")), 1, 1);
            h = silu(group_norm_layer(t, p, "n1", h, 4));
            h = conv1d_layer(t, p, "c2", h, 1, 1);
            return mse(h, t.constant(target));
        },
        s);
}

TEST(Backward, SumGivesOnes) {
    Tape<double> tape;
    std::mt19937_64 rng(6);
    auto x = tape.input(random_tensor({2, 3}, rng));
    tape.backward(sum(x));
    EXPECT_EQ(tape.grad(x), std::vector<double>(6, 1.0));
}

TEST(Backward, MseAgainstZero) {
    Tape<double> tape;
    std::mt19937_64 rng(7);
    auto xv = random_tensor({10}, rng);
    auto x = tape.input(xv);
    tape.backward(mse(x, tape.constant(Tensor<double>({10}))));
    for (int i = 0; i < 10; ++i) EXPECT_NEAR(tape.grad(x)[i], 2 * xv.data[i] / 10, 1e-15);
}

TEST(Backward, ParamAccumulatesAcrossRecordings) {
    ParamStore<double> s;
    s.create("w", {2}).value.data = {1.0, 2.0};
    for (int k = 0; k < 2; ++k) {
        Tape<double> tape;
        tape.backward(sum(tape.param(s.get("w"))));
    }
    EXPECT_EQ(s.get("w").grad, (std::vector<double>{2.0, 2.0}));
}

TEST(Backward, UsageErrors) {
    Tape<double> tape;
    auto x = tape.input(Tensor<double>({3}, 1.0));
    EXPECT_THROW(tape.backward(x), hh::UsageError);
    auto l = sum(x);
    tape.backward(l);
    EXPECT_THROW(tape.backward(l), hh::UsageError);
}

TEST(Backward, DeterministicInFloat) {
    auto run = [] {
        std::mt19937_64 rng(8);
        ParamStore<float> s;
        init_conv1d(s, "c", 4, 4, 3, rng);
        Tensor<float> x({4, 32});
        std::normal_distribution<float> n;
        for (auto& v : x.data) v = n(rng);
        Tape<float> tape;
        tape.backward(mse(conv1d_layer(tape, s, "c", tape.constant(x), 1, 1), tape.constant(Tensor<float>({4, 32}))));
        return s.get("c/w").grad;
    };
    EXPECT_EQ(run(), run());
}

TEST(Adam, ZeroGradientLeavesParams) {
    ParamStore<double> s;
    s.create("w", {3}).value.data = {0.5, -1.0, 2.0};
    const auto before = s.get("w").value;
    AdamState<double> st;
    adam_step(s, st, 0.1);
    EXPECT_EQ(s.get("w").value, before);
}

TEST(Adam, FirstStepClosedForm) {
    ParamStore<double> s;
    s.create("w", {3}).value.data = {0.0, 0.0, 0.0};
    s.get("w").grad = {0.3, -2.0, 1e-3};
    AdamState<double> st;
    const double lr = 0.01;
    adam_step(s, st, lr);
    for (int i = 0; i < 3; ++i) {
        const double g = s.get("w").grad[i];
        EXPECT_NEAR(s.get("w").value.data[i], -lr * g / (std::abs(g) + st.cfg.eps), 1e-15);
    }
}

TEST(Adam, QuadraticMatchesScalarReference) {
    // Reference: textbook scalar Adam on f(x) = x^2.
    double x_ref = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
        const double g = 2 * x_ref;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        x_ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    ParamStore<double> s;
    s.create("x", {1}).value.data = {1.0};
    AdamState<double> st;
    for (int t = 0; t < 100; ++t) {
        s.zero_grad();
        Tape<double> tape;
        auto x = tape.param(s.get("x"));
        tape.backward(sum(mul(x, x)));
        adam_step(s, st, 0.1);
    }
    EXPECT_NEAR(s.get("x").value.data[0], x_ref, 1e-12);
    EXPECT_LT(std::abs(s.get("x").value.data[0]), 0.05);
}

class CheckpointTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("hh_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(dir_);
        std::mt19937_64 rng(9);
        init_conv1d(params_, "c", 2, 3, 3, rng);
        init_linear(params_, "l", 4, 2, rng);
        for (auto& [n, p] : params_.items())
            for (auto& g : p.grad) g = 0.25f;
        adam_step(params_, adam_, 1e-3);
        ckpt_.metadata = {{"epoch", 3}, {"step", 120}, {"config_hash", "abc123"}, {"mel_min", -11.5129}, {"mel_max", 2.25}};
        store_params(ckpt_, params_, &adam_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::filesystem::path dir_;
    ParamStore<float> params_;
    AdamState<float> adam_;
    Checkpoint ckpt_;
};

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
    save_checkpoint(dir_ / "a.hhrf", ckpt_);
    auto loaded = load_checkpoint(dir_ / "a.hhrf");
    EXPECT_EQ(loaded, ckpt_);
    save_checkpoint(dir_ / "b.hhrf", loaded);
    EXPECT_EQ(hh::read_file(dir_ / "a.hhrf"), hh::read_file(dir_ / "b.hhrf"));
}

TEST_F(CheckpointTest, RestoresParamsAndOptimizer) {
    ParamStore<float> fresh;
    std::mt19937_64 rng(10);
    init_conv1d(fresh, "c", 2, 3, 3, rng);
    init_linear(fresh, "l", 4, 2, rng);
    AdamState<float> st;
    restore_params(ckpt_, fresh, &st);
    for (auto& [n, p] : params_.items()) EXPECT_EQ(fresh.get(n).value, p.value);
    EXPECT_EQ(st.step, 1);
    EXPECT_EQ(st.m, adam_.m);
    EXPECT_EQ(st.v, adam_.v);
}

TEST_F(CheckpointTest, TruncatedFileIsCleanError) {
    const auto bytes = encode_checkpoint(ckpt_);
    for (std::size_t cut : {std::size_t(2), std::size_t(10), bytes.size() / 2, bytes.size() - 1}) {
        hh::write_file_atomic(dir_ / "t.hhrf", bytes.substr(0, cut));
        EXPECT_THROW(load_checkpoint(dir_ / "t.hhrf"), hh::Error) << "cut at " << cut;
    }
}

TEST_F(CheckpointTest, MagicAndVersionChecked) {
    auto bytes = encode_checkpoint(ckpt_);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad_magic), hh::IncompatibleError);
    auto bad_version = bytes;
    bad_version[4] = 7;
    EXPECT_THROW(decode_checkpoint(bad_version), hh::IncompatibleError);
}

TEST_F(CheckpointTest, ConfigHashMismatchReportsBoth) {
    EXPECT_NO_THROW(require_config_hash(ckpt_, "abc123"));
    try {
        require_config_hash(ckpt_, "ffff0000");
        FAIL() << "expected refusal";
    } catch (const hh::IncompatibleError& e) {
        EXPECT_NE(std::string(e.what()).find("abc123"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("ffff0000"), std::string::npos);
    }
}

TEST_F(CheckpointTest, ShapeMismatchLeavesModelUntouched) {
    ParamStore<float> other;
    std::mt19937_64 rng(11);
    init_conv1d(other, "c", 2, 3, 3, rng);
    init_linear(other, "l", 5, 2, rng);
    const auto before = other.get("c/w").value;
    EXPECT_THROW(restore_params(ckpt_, other), hh::IncompatibleError);
    EXPECT_EQ(other.get("c/w").value, before);
}

TEST(GradCheck, DetectsWrongGradient) {
    auto s = store_of({{"a", {4}}});
    const auto r = grad_check(
        [](Tape<double>& t, ParamStore<double>& p) {
            auto a = t.param(p.get("a"));
            Tensor<double> sq(a.shape());
            for (std::size_t i = 0; i < sq.size(); ++i) sq.data[i] = a.value().data[i] * a.value().data[i];
            // Deliberately reports d(a^2)/da = a instead of 2a.
            auto y = t.push("bad_square", std::move(sq), true, [&t, a, id = int(t.node_count())] {
                auto g = t.grad_buffer(id);
                auto ga = t.grad_buffer(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * t.value(a.id).data[i];
            });
            return sum(y);
        },
        s);
    EXPECT_NEAR(r.max_rel_error, 0.5, 1e-6);
}

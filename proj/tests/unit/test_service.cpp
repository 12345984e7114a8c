#include <gtest/gtest.h>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <thread>

#include "hh/dsp/audio_io.hpp"
#include "hh/error.hpp"
#include "hh/eval/report.hpp"
#include "hh/service/cli.hpp"
#include "hh/service/service.hpp"
#include "hh/sim/material.hpp"
#include "hh/util.hpp"
#include "../support/temp_dir.hpp"

using namespace hh;
using namespace hh::service;
using hh::fixtures::temp_dir;
using nlohmann::json;

namespace {

flow::ModelConfig small_model() {
    auto m = flow::ModelConfig::desk();
    m.vf.base_channels = 16;
    m.vf.embed_dim = 32;
    m.vf.time_dim = 16;
    m.vf.groups = 4;
    m.cond.embed_dim = 32;
    m.cond.encoder_channels = {4, 8, 8, 8};
    return m;
}

struct CliResult {
    int code;
    std::string out, err;
};

CliResult cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

json trajectory_json(const sim::HandTrajectory& t) { return t; }

}  // namespace

class ServiceFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = temp_dir("service");
        auto cfg = sim::DatasetConfig::desk();
        cfg.n_scenes = 3;
        cfg.clips_per_scene = 2;
        cfg.clip_duration = 1.0;
        cfg.seed = 7;
        manifest_ = new sim::DatasetManifest(sim::generate_dataset(cfg, dir_ / "data"));
        model_ = new flow::FlowModel(flow::FlowModel::create(
            small_model(), cfg, dsp::MelNormalizer{manifest_->mel_min, manifest_->mel_max}, 1));
        ckpt_ = dir_ / "model.ckpt";
        ad::save_checkpoint(ckpt_, model_->to_checkpoint());
    }
    static void TearDownTestSuite() {
        delete manifest_;
        delete model_;
        std::filesystem::remove_all(dir_);
    }

    static GenerationService make(ServiceOptions o = {}) {
        return GenerationService(*model_, hex64(fnv1a(read_file(ckpt_))), *manifest_, o);
    }

    static const sim::SceneModel scene(int k = 0) {
        const auto ids = manifest_->scene_ids("test");
        return sim::scene_for(manifest_->config, sim::seed_from_scene_id(ids.at(k)));
    }

    /// A request for a simulated 1 s tap on the first test scene.
    static json tap_request(std::uint64_t seed = 1, int steps = 4) {
        const auto s = scene();
        return {{"scene_id", s.id},
                {"trajectory", trajectory_json(sim::sample_trajectory(s, sim::Gesture::tap, seed, 1.0))},
                {"view_id", "front"},
                {"sample", {{"steps", steps}, {"guidance", 4.5}, {"seed", seed}}}};
    }

    static std::filesystem::path dir_, ckpt_;
    static sim::DatasetManifest* manifest_;
    static flow::FlowModel* model_;
};
std::filesystem::path ServiceFixture::dir_, ServiceFixture::ckpt_;
sim::DatasetManifest* ServiceFixture::manifest_ = nullptr;
flow::FlowModel* ServiceFixture::model_ = nullptr;

TEST_F(ServiceFixture, HealthCarriesCheckpointHash) {
    auto svc = make();
    const auto r = svc.health();
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body["status"], "ok");
    EXPECT_EQ(r.body["checkpoint_hash"], hex64(fnv1a(read_file(ckpt_))));
    EXPECT_EQ(r.body["sample_rate"], 8000);
}

TEST_F(ServiceFixture, SceneListHasDecodablePreviews) {
    auto svc = make();
    const auto r = svc.scenes();
    ASSERT_EQ(r.status, 200);
    ASSERT_EQ(r.body["scenes"].size(), 3u);
    for (const auto& s : r.body["scenes"]) {
        const auto& p = s["preview"];
        const auto raster = sim::decode_raster(base64_decode(p["base64"].get<std::string>()), p["height"], p["width"]);
        EXPECT_EQ(raster.width, sim::kGlobalViewSize);
        EXPECT_FALSE(s["materials"].empty());
    }
}

TEST_F(ServiceFixture, SceneDetailMatchesSimulator) {
    auto svc = make();
    const auto s = scene();
    const auto r = svc.scene(s.id);
    ASSERT_EQ(r.status, 200);
    ASSERT_EQ(r.body["grid"].size(), static_cast<std::size_t>(s.rows()));
    for (int i = 0; i < s.rows(); ++i)
        for (int j = 0; j < s.cols(); ++j) {
            EXPECT_EQ(r.body["grid"][i][j].get<int>(), s.grid(i, j));
            EXPECT_EQ(r.body["heightmap"][i][j].get<double>(), s.heightmap(i, j));
        }
    EXPECT_DOUBLE_EQ(r.body["extent"].get<double>(), s.extent);
    for (const auto& m : r.body["materials"])
        EXPECT_EQ(m["name"], sim::material_by_id(m["id"].get<int>()).name);
    EXPECT_EQ(svc.scene("scene_424242").status, 404);
}

TEST_F(ServiceFixture, OneSecondTapReturnsAudioWithinOneHop) {
    auto svc = make();
    const auto r = svc.generate(tap_request().dump());
    ASSERT_EQ(r.status, 200) << r.body.dump();
    const auto wav = dsp::decode_wav(base64_decode(r.body["audio"]["base64"].get<std::string>()));
    EXPECT_EQ(wav.sample_rate, 8000);
    EXPECT_LE(std::abs(static_cast<long>(wav.samples.size()) - 8000), 128);
    const auto oracle = dsp::decode_wav(base64_decode(r.body["oracle_audio"]["base64"].get<std::string>()));
    EXPECT_EQ(oracle.samples.size(), wav.samples.size());
    const auto& shape = r.body["mel"]["shape"];
    EXPECT_EQ(shape[1], 40);
    EXPECT_EQ(r.body["mel"]["values"].size(), shape[0].get<std::size_t>() * 40);
    EXPECT_GE(r.body["contacts"].size(), 1u);
    for (const char* k : {"render_ms", "condition_ms", "sample_ms", "vocoder_ms", "total_ms"})
        EXPECT_GE(r.body["timing"][k].get<double>(), 0.0) << k;
    EXPECT_TRUE(all_finite(r.body));
}

TEST_F(ServiceFixture, GenerationIsDeterministicPerSeed) {
    auto svc = make();
    const auto a = svc.generate(tap_request(3).dump()), b = svc.generate(tap_request(3).dump());
    ASSERT_EQ(a.status, 200);
    EXPECT_EQ(a.body["audio"], b.body["audio"]);
}

TEST_F(ServiceFixture, ZeroFrameTrajectoryIs422) {
    auto svc = make();
    auto req = tap_request();
    req["trajectory"]["frames"] = json::array();
    req["trajectory"]["presence"] = json::array();
    const auto r = svc.generate(req.dump());
    EXPECT_EQ(r.status, 422);
    EXPECT_EQ(r.body["field"], "trajectory.frames");
    EXPECT_TRUE(r.body.contains("code") && r.body.contains("message"));
}

TEST_F(ServiceFixture, OversizeTrajectoryIs413) {
    auto svc = make();
    const auto s = scene();
    auto long_traj = sim::sample_trajectory(s, sim::Gesture::tap, 1, 8.0);
    long_traj.poses.push_back(long_traj.poses.back());
    auto req = tap_request();
    req["trajectory"] = trajectory_json(long_traj);
    EXPECT_EQ(svc.generate(req.dump()).status, 413);

    ServiceOptions o;
    o.max_body_bytes = 64;
    auto small = make(o);
    const auto r = small.generate(tap_request().dump());
    EXPECT_EQ(r.status, 413);
    EXPECT_EQ(r.body["code"], "payload_too_large");
}

TEST_F(ServiceFixture, FieldLevelMessages) {
    auto svc = make();
    auto expect_field = [&](json req, const std::string& field) {
        const auto r = svc.generate(req.dump());
        EXPECT_EQ(r.status, 422) << field;
        EXPECT_EQ(r.body.value("field", std::string()), field) << r.body.dump();
    };
    auto req = tap_request();
    req["scene_id"] = "scene_999999";
    expect_field(req, "scene_id");
    req = tap_request();
    req["view_id"] = "bottom";
    expect_field(req, "view_id");
    req = tap_request();
    req["sample"]["steps"] = 0;
    expect_field(req, "sample.steps");
    req = tap_request();
    req["sample"]["guidance"] = -1;
    expect_field(req, "sample.guidance");
    req = tap_request();
    req["sample"]["temperature"] = 1;
    expect_field(req, "sample.temperature");
    req = tap_request();
    req["extra"] = 1;
    expect_field(req, "extra");
    req = tap_request();
    req["trajectory"]["rate"] = 25;
    expect_field(req, "trajectory.rate");
    req = tap_request();
    req["trajectory"]["frames"][3][1][4][2] = "x";
    expect_field(req, "trajectory.frames[3][1][4]");

    const auto bad_json = svc.generate("{not json");
    EXPECT_EQ(bad_json.status, 422);
    EXPECT_EQ(bad_json.body["code"], "invalid_json");
}

TEST_F(ServiceFixture, ValidationIsExactlyTrajectoryValidation) {
    auto svc = make();
    const auto s = scene();
    const auto base = sim::sample_trajectory(s, sim::Gesture::tap, 11, 1.0);
    std::mt19937_64 rng(4);
    int rejected = 0;
    for (int trial = 0; trial < 24; ++trial) {
        auto t = base;
        const int f = std::uniform_int_distribution<int>(1, t.n_frames() - 1)(rng);
        const int k = std::uniform_int_distribution<int>(0, sim::kKeypoints - 1)(rng);
        switch (trial % 4) {
            case 0: t.poses[f].keypoints[sim::kRight][k][0] += 0.25 * (trial % 8 == 0 ? 1.0 : 0.1); break;
            case 1: t.poses[f].keypoints[sim::kRight][k][2] += 2.0 * (trial % 8 == 1 ? 1.0 : 0.0); break;
            case 2:
                t.poses[f].presence[sim::kLeft] = false;
                t.poses[f].keypoints[sim::kLeft][k] = {0.0, 0.0, trial % 8 == 2 ? 0.01 : 0.0};
                break;
            default: t.poses[f].keypoints[sim::kRight][k][1] -= trial % 8 == 3 ? 3.0 : 0.001; break;
        }
        bool valid = true;
        try {
            t.validate(s);
        } catch (const ValidationError&) {
            valid = false;
        }
        auto req = tap_request();
        req["trajectory"] = trajectory_json(t);
        const auto r = svc.generate(req.dump());
        EXPECT_EQ(r.status, valid ? 200 : 422) << "trial " << trial << " " << r.body.dump().substr(0, 200);
        rejected += !valid;
    }
    EXPECT_GT(rejected, 0);
    EXPECT_LT(rejected, 24);
}

TEST_F(ServiceFixture, SaturatedWorkerPoolAnswers503) {
    ServiceOptions o;
    o.workers = 1;
    auto svc = make(o);
    const std::string body = tap_request(1, 60).dump();
    std::vector<std::future<Response>> futures;
    for (int i = 0; i < 4; ++i)
        futures.push_back(std::async(std::launch::async, [&] { return svc.generate(body); }));
    int ok = 0, busy = 0;
    for (auto& f : futures) {
        const auto r = f.get();
        ok += r.status == 200;
        busy += r.status == 503;
        if (r.status == 503) EXPECT_EQ(r.body["code"], "busy");
    }
    EXPECT_GE(ok, 1);
    EXPECT_GE(busy, 1);
    EXPECT_EQ(ok + busy, 4);
}

TEST_F(ServiceFixture, ConcurrentRequestsMatchSequentialOnes) {
    auto svc = make();
    const auto a_body = tap_request(5).dump(), b_body = tap_request(6).dump();
    const auto a_seq = svc.generate(a_body), b_seq = svc.generate(b_body);
    auto fa = std::async(std::launch::async, [&] { return svc.generate(a_body); });
    auto fb = std::async(std::launch::async, [&] { return svc.generate(b_body); });
    const auto a = fa.get(), b = fb.get();
    ASSERT_EQ(a.status, 200);
    ASSERT_EQ(b.status, 200);
    EXPECT_EQ(a.body["audio"], a_seq.body["audio"]);
    EXPECT_EQ(b.body["audio"], b_seq.body["audio"]);
}

TEST_F(ServiceFixture, TimeoutIs500) {
    ServiceOptions o;
    o.timeout_s = 1e-6;
    auto svc = make(o);
    const auto r = svc.generate(tap_request().dump());
    EXPECT_EQ(r.status, 500);
    EXPECT_EQ(r.body["code"], "timeout");
}

TEST_F(ServiceFixture, MismatchedDatasetIsRefused) {
    auto other = *manifest_;
    other.config.dsp = dsp::DspConfig::reference();
    EXPECT_THROW(GenerationService(*model_, "x", other), ConfigError);
}

TEST(Json, FiniteCheck) {
    EXPECT_TRUE(all_finite(json{{"a", {1.0, 2, "x"}}}));
    EXPECT_FALSE(all_finite(json{{"a", {1.0, std::nan("")}}}));
    EXPECT_FALSE(all_finite(json::array({std::numeric_limits<double>::infinity()})));
}

TEST_F(ServiceFixture, HttpRoutesAndErrorBodies) {
    ServiceOptions o;
    o.max_body_bytes = 1 << 20;
    auto svc = make(o);
    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    std::thread t([&] { server.listen(); });
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);

    auto health = c.Get("/api/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(json::parse(health->body)["checkpoint_hash"], hex64(fnv1a(read_file(ckpt_))));

    auto scenes = c.Get("/api/scenes");
    ASSERT_TRUE(scenes);
    const auto first = json::parse(scenes->body)["scenes"][0]["id"].get<std::string>();
    auto detail = c.Get("/api/scenes/" + first);
    ASSERT_TRUE(detail);
    EXPECT_EQ(detail->status, 200);
    EXPECT_EQ(json::parse(detail->body)["id"], first);

    auto ok = c.Post("/api/generate", tap_request().dump(), "application/json");
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    EXPECT_EQ(ok->get_header_value("Content-Type"), "application/json");

    auto req = tap_request();
    req["trajectory"]["frames"] = json::array();
    req["trajectory"]["presence"] = json::array();
    auto bad = c.Post("/api/generate", req.dump(), "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 422);
    EXPECT_EQ(json::parse(bad->body)["field"], "trajectory.frames");

    auto huge = c.Post("/api/generate", std::string((1 << 20) + 10, ' '), "application/json");
    ASSERT_TRUE(huge);
    EXPECT_EQ(huge->status, 413);
    EXPECT_EQ(json::parse(huge->body)["code"], "payload_too_large");

    auto missing = c.Get("/api/nothing");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(json::parse(missing->body)["code"], "not_found");

    server.stop();
    t.join();
}

TEST(Cli, UnknownSubcommandPrintsUsageAndExits2) {
    const auto r = cli({"frobnicate"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
    EXPECT_EQ(cli({}).code, kExitUsage);
    EXPECT_EQ(cli({"sample", "--scene", "scene_1"}).code, kExitUsage);
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, SchemaViolationsListEveryFieldOnOneLine) {
    const auto dir = temp_dir("cli_schema");
    std::filesystem::create_directories(dir);
    write_text(dir / "ds.json", R"({"n_scenes": 1, "clip_duration": -2, "colour": "red"})");
    const auto r = cli({"dataset", "gen", "--config", (dir / "ds.json").string(), "--out", (dir / "out").string()});
    EXPECT_EQ(r.code, kExitFailure);
    EXPECT_EQ(count_lines(r.err), 1) << r.err;
    for (const char* f : {"n_scenes", "clip_duration", "colour"}) EXPECT_NE(r.err.find(f), std::string::npos) << f;
    EXPECT_FALSE(std::filesystem::exists(dir / "out"));
    std::filesystem::remove_all(dir);
}

TEST(Cli, RunConfigCollectsErrorsAcrossSections) {
    const json j = {{"model", {{"vector_field", {{"groups", 0}}}}},
                    {"train", {{"epochs", 0}, {"batch", 4}}},
                    {"variant", "no_audio"},
                    {"optimizer", "sgd"}};
    try {
        run_config_from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        for (const char* f : {"model.vector_field.groups", "train.epochs", "train.batch", "variant", "optimizer"})
            EXPECT_NE(msg.find(f), std::string::npos) << f << " in " << msg;
    }
    const auto run = run_config_from_json({{"train", {{"epochs", 3}}}});
    EXPECT_EQ(run.train.epochs, 3);
    EXPECT_EQ(run.train.batch_size, flow::TrainConfig::desk().batch_size);
    EXPECT_EQ(run.model, flow::ModelConfig::desk());
    EXPECT_EQ(run_config_from_json({{"preset", "reference"}}).model, flow::ModelConfig::reference());
    EXPECT_EQ(dataset_config_from_json({{"preset", "reference"}}), sim::DatasetConfig::reference());
}

TEST(Cli, DataDirFallsBackToEnvironment) {
    ::unsetenv("HH_DATA_DIR");
    EXPECT_THROW(resolve_data_dir(""), ConfigError);
    ::setenv("HH_DATA_DIR", "/tmp/hh_env_root", 1);
    EXPECT_EQ(resolve_data_dir(""), std::filesystem::path("/tmp/hh_env_root"));
    EXPECT_EQ(resolve_data_dir("/x"), std::filesystem::path("/x"));
    ::unsetenv("HH_DATA_DIR");
}

TEST_F(ServiceFixture, SampleIsByteIdenticalAcrossRuns) {
    const auto id = manifest_->scene_ids("test").at(0);
    auto run = [&](const std::string& name, const std::string& seed) {
        return cli({"sample", "--ckpt", ckpt_.string(), "--scene", id, "--gesture", "tap", "--seed", seed, "--out",
                    (dir_ / name).string(), "--steps", "4"});
    };
    ASSERT_EQ(run("a.wav", "9").code, kExitOk);
    ASSERT_EQ(run("b.wav", "9").code, kExitOk);
    ASSERT_EQ(run("c.wav", "10").code, kExitOk);
    EXPECT_EQ(read_file(dir_ / "a.wav"), read_file(dir_ / "b.wav"));
    EXPECT_NE(read_file(dir_ / "a.wav"), read_file(dir_ / "c.wav"));
    const auto bad = run("d.wav", "not-a-number");
    EXPECT_EQ(bad.code, kExitUsage);
    const auto bad_scene = cli({"sample", "--ckpt", ckpt_.string(), "--scene", "nope", "--gesture", "tap", "--out",
                                (dir_ / "e.wav").string()});
    EXPECT_EQ(bad_scene.code, kExitFailure);
    EXPECT_EQ(count_lines(bad_scene.err), 1);
}

TEST(Cli, DatasetTrainEvalSmokeRun) {
    const auto dir = temp_dir("cli_e2e");
    std::filesystem::create_directories(dir);
    write_text(dir / "ds.json", R"({"n_scenes": 3, "clips_per_scene": 4, "clip_duration": 1.0})");
    json run = {{"model", small_model()},
                {"train", {{"epochs", 1}, {"batch_size", 4}, {"warmup_steps", 2}, {"val_clips", 1}}}};
    write_text(dir / "run.json", run.dump());
    write_text(dir / "oracle.json",
               R"({"channels": 8, "feature_dim": 2, "epochs": 1, "gate": 0.0, "vocoder_augment": false})");
    const std::string data = (dir / "data").string(), ckpt = (dir / "m.ckpt").string();

    auto r = cli({"dataset", "gen", "--config", (dir / "ds.json").string(), "--out", data, "--seed", "2"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    r = cli({"train", "--dataset", data, "--config", (dir / "run.json").string(), "--out", ckpt, "--seed", "0"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("epoch 0"), std::string::npos);
    const std::string report = (dir / "report.json").string();
    r = cli({"eval", "--ckpt", ckpt, "--dataset", data, "--report", report, "--oracle-config",
             (dir / "oracle.json").string(), "--steps", "2", "--seed", "1"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto rep = json::parse(read_file(report)).get<eval::MetricReport>();
    EXPECT_EQ(rep.n_clips, 4);
    EXPECT_NO_THROW(rep.validate());
    EXPECT_TRUE(std::filesystem::exists(dir / "data" / "oracle.ckpt"));
    std::filesystem::remove_all(dir);
}

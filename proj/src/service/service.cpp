#include "hh/service/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <httplib.h>

#include "hh/dsp/audio_io.hpp"
#include "hh/error.hpp"
#include "hh/sim/material.hpp"
#include "hh/util.hpp"

namespace hh::service {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

json audio_json(const dsp::Waveform& w) {
    return {{"sample_rate", w.sample_rate},
            {"n_samples", w.samples.size()},
            {"duration", w.duration()},
            {"format", "wav"},
            {"base64", base64_encode(dsp::encode_wav(w))}};
}

json raster_json(const sim::Raster& r) {
    return {{"width", r.width},
            {"height", r.height},
            {"channels", r.channels},
            {"encoding", "rgb8"},
            {"base64", base64_encode(sim::encode_raster(r))}};
}

template <typename T>
json matrix_rows(const Matrix<T>& m) {
    json out = json::array();
    for (int r = 0; r < m.rows; ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

/// Error from a nested reader, with the field path prefixed.
std::string prefixed(const std::string& prefix, const std::string& field) {
    if (field.empty()) return prefix;
    if (field.front() == '[') return prefix + field;
    return prefix + "." + field;
}

struct Rejection {
    Response response;
};

[[noreturn]] void reject(int status, const std::string& code, const std::string& message, const std::string& field = {}) {
    throw Rejection{{status, error_body(code, message, field)}};
}

dsp::Waveform fit_length(dsp::Waveform w, std::size_t n) {
    w.samples.resize(n, 0.0f);
    return w;
}

}  // namespace

json error_body(const std::string& code, const std::string& message, const std::string& field) {
    json j = {{"code", code}, {"message", message}};
    if (!field.empty()) j["field"] = field;
    return j;
}

bool all_finite(const json& j) {
    if (j.is_number_float()) return std::isfinite(j.get<double>());
    if (j.is_array() || j.is_object())
        return std::all_of(j.begin(), j.end(), [](const json& v) { return all_finite(v); });
    return true;
}

GenerationService::GenerationService(const flow::FlowModel& model, std::string checkpoint_hash,
                                     const sim::DatasetManifest& dataset, ServiceOptions options)
    : options_(std::move(options)), checkpoint_hash_(std::move(checkpoint_hash)), dataset_config_(dataset.config) {
    if (options_.workers < 1) throw ConfigError("service needs at least one worker");
    if (!(options_.timeout_s > 0.0)) throw ConfigError("service timeout must be positive");
    if (!model.norm) throw ConfigError("checkpoint has no mel normalization stats");
    if (!(model.dsp() == dataset.config.dsp))
        throw ConfigError("checkpoint DSP config differs from the dataset's (sample rate, FFT, hop or mel bins)");
    model_hash_ = model.info.value("config_hash", std::string());
    dataset_hash_ = dataset.config.hash();
    for (const std::string split : {"train", "val", "test"})
        for (const auto* e : dataset.split(split)) {
            if (scenes_.count(e->scene_id)) continue;
            SceneInfo info;
            info.model = sim::scene_for(dataset.config, e->scene_seed);
            info.split = split;
            info.preview = raster_json(sim::render_views(info.model, sim::HandPose{}, sim::ViewId::top).global);
            scenes_.emplace(e->scene_id, std::move(info));
            scene_order_.push_back(e->scene_id);
        }
    for (int i = 0; i < options_.workers; ++i) models_.push_back(std::make_unique<flow::FlowModel>(model));
    busy_.assign(options_.workers, false);
}

Response GenerationService::health() const {
    return {200,
            {{"status", "ok"},
             {"version", kVersion},
             {"checkpoint_hash", checkpoint_hash_},
             {"model_config_hash", model_hash_},
             {"dataset_hash", dataset_hash_},
             {"sample_rate", dataset_config_.dsp.sample_rate},
             {"n_mels", dataset_config_.dsp.n_mels},
             {"hop", dataset_config_.dsp.hop},
             {"max_duration", sim::kMaxDuration},
             {"trajectory_rate", sim::kTrajectoryRate},
             {"workers", options_.workers},
             {"timeout_s", options_.timeout_s},
             {"n_scenes", scene_order_.size()}}};
}

json GenerationService::scene_summary(const SceneInfo& s) const {
    json materials = json::array();
    for (int id : s.model.material_ids()) {
        const auto& m = sim::material_by_id(id);
        materials.push_back({{"id", m.id}, {"name", m.name}, {"color", m.color}});
    }
    return {{"id", s.model.id},       {"split", s.split},     {"rows", s.model.rows()},
            {"cols", s.model.cols()}, {"extent", s.model.extent}, {"width", s.model.width()},
            {"depth", s.model.depth()}, {"materials", materials}, {"preview", s.preview}};
}

Response GenerationService::scenes() const {
    json list = json::array();
    for (const auto& id : scene_order_) list.push_back(scene_summary(scenes_.at(id)));
    return {200, {{"scenes", list}}};
}

Response GenerationService::scene(const std::string& id) const {
    const auto it = scenes_.find(id);
    if (it == scenes_.end()) return {404, error_body("scene_not_found", "no scene with id " + id, "id")};
    json j = scene_summary(it->second);
    j["grid"] = matrix_rows(it->second.model.grid);
    j["heightmap"] = matrix_rows(it->second.model.heightmap);
    return {200, j};
}

int GenerationService::acquire_slot() {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < busy_.size(); ++i)
        if (!busy_[i]) {
            busy_[i] = true;
            return static_cast<int>(i);
        }
    return -1;
}

void GenerationService::release_slot(int slot) {
    std::lock_guard lock(mutex_);
    busy_[slot] = false;
}

Response GenerationService::generate(const std::string& body) {
    const auto t_start = std::chrono::steady_clock::now();
    try {
        if (body.size() > options_.max_body_bytes)
            reject(413, "payload_too_large",
                   "request body exceeds " + std::to_string(options_.max_body_bytes) + " bytes");
        json req;
        try {
            req = json::parse(body);
        } catch (const json::parse_error& e) {
            reject(422, "invalid_json", std::string("request body is not valid JSON: ") + e.what());
        }
        if (!req.is_object()) reject(422, "invalid_request", "request body must be a JSON object");
        for (const auto& [key, _] : req.items())
            if (key != "scene_id" && key != "trajectory" && key != "view_id" && key != "sample")
                reject(422, "invalid_request", "unknown field", key);

        if (!req.contains("scene_id") || !req["scene_id"].is_string())
            reject(422, "invalid_request", "scene_id must be a string", "scene_id");
        const std::string scene_id = req["scene_id"].get<std::string>();
        const auto scene_it = scenes_.find(scene_id);
        if (scene_it == scenes_.end()) reject(422, "invalid_request", "unknown scene " + scene_id, "scene_id");
        const sim::SceneModel& scene = scene_it->second.model;

        sim::ViewId view = sim::ViewId::front;
        if (req.contains("view_id")) {
            if (!req["view_id"].is_string()) reject(422, "invalid_request", "view_id must be a string", "view_id");
            try {
                view = sim::parse_view(req["view_id"].get<std::string>());
            } catch (const ValidationError& e) {
                reject(422, "invalid_request", e.what(), "view_id");
            }
        }

        flow::SampleConfig sample;
        if (req.contains("sample")) {
            const json& s = req["sample"];
            if (!s.is_object()) reject(422, "invalid_request", "sample must be an object", "sample");
            for (const auto& [key, v] : s.items()) {
                const std::string field = "sample." + key;
                if (key == "steps") {
                    if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 1000)
                        reject(422, "invalid_request", "steps must be an integer in [1, 1000]", field);
                    sample.steps = v.get<int>();
                } else if (key == "guidance") {
                    if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0 ||
                        v.get<double>() > 100.0)
                        reject(422, "invalid_request", "guidance must be a number in [0, 100]", field);
                    sample.guidance_scale = v.get<double>();
                } else if (key == "seed") {
                    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
                        reject(422, "invalid_request", "seed must be a non-negative integer", field);
                    sample.seed = v.get<std::uint64_t>();
                } else {
                    reject(422, "invalid_request", "unknown field", field);
                }
            }
        }

        if (!req.contains("trajectory")) reject(422, "invalid_request", "trajectory is required", "trajectory");
        const json& tj = req["trajectory"];
        const std::size_t max_frames = static_cast<std::size_t>(std::lround(sim::kMaxDuration * sim::kTrajectoryRate));
        if (tj.is_object() && tj.contains("frames") && tj["frames"].is_array() && tj["frames"].size() > max_frames)
            reject(413, "trajectory_too_large",
                   "trajectory has " + std::to_string(tj["frames"].size()) + " frames; the limit is " +
                       std::to_string(max_frames) + " (8 s at 30 Hz)",
                   "trajectory.frames");
        sim::HandTrajectory traj;
        try {
            traj = tj.get<sim::HandTrajectory>();
            traj.validate(scene);
        } catch (const ValidationError& e) {
            reject(422, "invalid_trajectory", e.what(), prefixed("trajectory", e.field()));
        }

        const int slot = acquire_slot();
        if (slot < 0)
            reject(503, "busy", "all " + std::to_string(options_.workers) + " sampling workers are busy; retry later");
        flow::GeneratedSound gen;
        try {
            gen = flow::generate_sound(*models_[slot], scene, traj, view, sample);
        } catch (...) {
            release_slot(slot);
            throw;
        }
        release_slot(slot);

        const auto t_oracle = std::chrono::steady_clock::now();
        const auto& dcfg = dataset_config_;
        const dsp::Waveform oracle = fit_length(
            sim::synthesize(gen.events, sim::material_by_id, dcfg.dsp.sample_rate, traj.duration(),
                            derive_seed(sample.seed, 0x0a0d), {dcfg.synth_gain, dcfg.noise_bed})
                .waveform,
            gen.waveform.samples.size());
        const double oracle_ms = ms_since(t_oracle);

        const double total_ms = ms_since(t_start);
        if (total_ms > options_.timeout_s * 1000.0)
            reject(500, "timeout",
                   "generation took " + std::to_string(static_cast<long>(total_ms)) + " ms, over the " +
                       std::to_string(static_cast<long>(options_.timeout_s * 1000.0)) + " ms limit");

        json contacts = json::array();
        for (const auto& e : gen.events) contacts.push_back(e);
        json values = json::array();
        for (float v : gen.mel.frames.data) values.push_back(v);
        json res = {{"scene_id", scene_id},
                    {"view_id", sim::view_name(view)},
                    {"sample", {{"steps", sample.steps}, {"guidance", sample.guidance_scale}, {"seed", sample.seed}}},
                    {"duration", traj.duration()},
                    {"audio", audio_json(gen.waveform)},
                    {"mel",
                     {{"shape", {gen.mel.n_frames(), gen.mel.n_mels()}},
                      {"frame_rate", gen.mel.frame_rate},
                      {"log_floor", dcfg.dsp.log_floor},
                      {"values", std::move(values)}}},
                    {"contacts", std::move(contacts)},
                    {"oracle_audio", audio_json(oracle)},
                    {"timing",
                     {{"render_ms", gen.timings.render_ms},
                      {"condition_ms", gen.timings.condition_ms},
                      {"sample_ms", gen.timings.sample_ms},
                      {"vocoder_ms", gen.timings.vocoder_ms},
                      {"oracle_ms", oracle_ms},
                      {"total_ms", ms_since(t_start)}}}};
        if (!all_finite(res)) reject(500, "non_finite_output", "generation produced a non-finite value");
        return {200, std::move(res)};
    } catch (const Rejection& r) {
        return r.response;
    } catch (const ValidationError& e) {
        return {422, error_body("invalid_request", e.what(), e.field())};
    } catch (const std::exception& e) {
        return {500, error_body("internal_error", e.what())};
    }
}

struct HttpServer::Impl {
    GenerationService& service;
    httplib::Server server;
    int port = -1;
    explicit Impl(GenerationService& s) : service(s) {}
};

namespace {

void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(GenerationService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    auto& svc = impl_->service;
    // One byte past the service limit so the service itself answers oversize bodies with its JSON error.
    srv.set_payload_max_length(svc.options().max_body_bytes + 1);
    const auto timeout = std::chrono::milliseconds(static_cast<long>(svc.options().timeout_s * 1000.0));
    srv.set_read_timeout(timeout);
    srv.set_write_timeout(timeout);
    srv.Get("/api/health", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.health()); });
    srv.Get("/api/scenes", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.scenes()); });
    srv.Get(R"(/api/scenes/([A-Za-z0-9_\-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.scene(req.matches[1]));
    });
    srv.Post("/api/generate",
             [&svc](const httplib::Request& req, httplib::Response& res) { send(res, svc.generate(req.body)); });
    if (!svc.options().static_dir.empty() && !srv.set_mount_point("/", svc.options().static_dir.string()))
        throw IoError("static asset directory not found: " + svc.options().static_dir.string());
    srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        std::string code = "http_" + std::to_string(res.status);
        std::string message = httplib::status_message(res.status);
        if (res.status == 404) {
            code = "not_found";
            message = "no route for " + req.method + " " + req.path;
        } else if (res.status == 413) {
            code = "payload_too_large";
        }
        res.set_content(error_body(code, message).dump(), "application/json");
    });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "unknown error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(error_body("internal_error", message).dump(), "application/json");
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& srv = impl_->server;
    impl_->port = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
    if (impl_->port < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return impl_->port;
}

void HttpServer::listen() {
    if (impl_->port < 0) throw UsageError("HttpServer::listen called before bind");
    impl_->server.listen_after_bind();
}

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace hh::service

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/flow/model.hpp"
#include "hh/sim/dataset.hpp"

namespace hh::service {

struct ServiceOptions {
    /// Concurrent samplings; further /generate requests get 503.
    int workers = 2;
    double timeout_s = 30.0;
    std::size_t max_body_bytes = 16u << 20;
    /// Static asset bundle mounted at "/" when set.
    std::filesystem::path static_dir;
};

struct Response {
    int status = 200;
    nlohmann::json body;
};

/// {code, message, field?}
nlohmann::json error_body(const std::string& code, const std::string& message, const std::string& field = {});

/// True when every number in `j` is finite.
bool all_finite(const nlohmann::json& j);

/// Request handling independent of the HTTP transport. Each worker slot owns a private copy of
/// the model, so concurrent requests share no sampling state; the checkpoint and dataset are only
/// read at construction.
class GenerationService {
public:
    GenerationService(const flow::FlowModel& model, std::string checkpoint_hash, const sim::DatasetManifest& dataset,
                      ServiceOptions options = {});

    Response health() const;
    Response scenes() const;
    Response scene(const std::string& id) const;
    Response generate(const std::string& body);

    const ServiceOptions& options() const { return options_; }

private:
    struct SceneInfo {
        sim::SceneModel model;
        std::string split;
        nlohmann::json preview;
    };

    nlohmann::json scene_summary(const SceneInfo& s) const;
    int acquire_slot();
    void release_slot(int slot);

    ServiceOptions options_;
    std::string checkpoint_hash_;
    std::string model_hash_;
    sim::DatasetConfig dataset_config_;
    std::string dataset_hash_;
    std::map<std::string, SceneInfo> scenes_;
    std::vector<std::string> scene_order_;
    std::vector<std::unique_ptr<flow::FlowModel>> models_;
    std::vector<bool> busy_;
    std::mutex mutex_;
};

/// Binds the service to cpp-httplib. All routes live under /api.
class HttpServer {
public:
    explicit HttpServer(GenerationService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds `port` (0 picks a free one) and returns the bound port; throws IoError on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hh::service

#include "hh/service/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "hh/dsp/audio_io.hpp"
#include "hh/error.hpp"
#include "hh/eval/evaluate.hpp"
#include "hh/flow/model.hpp"
#include "hh/service/service.hpp"
#include "hh/util.hpp"

namespace hh::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Config errors as "section.field: message" lines, stripped of the per-section header.
void collect_errors(const ConfigError& e, const std::string& section, std::vector<std::string>& errors) {
    std::string msg = e.what();
    const auto first = msg.find('\n');
    if (first == std::string::npos) {
        errors.push_back(section.empty() ? msg : section + ": " + msg);
        return;
    }
    std::size_t pos = first + 1;
    while (pos < msg.size()) {
        auto end = msg.find('\n', pos);
        if (end == std::string::npos) end = msg.size();
        std::string line = msg.substr(pos, end - pos);
        line.erase(0, line.find_first_not_of(' '));
        if (!line.empty()) errors.push_back(section.empty() ? line : section + "." + line);
        pos = end + 1;
    }
}

[[noreturn]] void throw_errors(const std::vector<std::string>& errors) {
    std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " field" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
}

std::string read_preset(const json& j, std::vector<std::string>& errors) {
    if (!j.contains("preset")) return "desk";
    if (!j["preset"].is_string() || (j["preset"] != "desk" && j["preset"] != "reference")) {
        errors.push_back("preset: must be one of desk, reference");
        return "desk";
    }
    return j["preset"].get<std::string>();
}

/// Parses `patch` over `base` with the type's schema-checked reader.
template <typename T>
T overlay(const T& base, const json& patch, const std::string& section, std::vector<std::string>& errors) {
    json merged = base;
    if (!patch.is_object()) {
        errors.push_back(section + ": must be an object");
        return base;
    }
    merged.merge_patch(patch);
    try {
        return merged.get<T>();
    } catch (const ConfigError& e) {
        collect_errors(e, section, errors);
    }
    return base;
}

/// Diagnostics are one line: embedded newlines become "; ".
std::string one_line(std::string msg) {
    std::string out;
    for (std::size_t i = 0; i < msg.size(); ++i) {
        if (msg[i] == '\n') {
            if (!out.empty() && out.back() == ':') out += " ";
            else out += "; ";
            while (i + 1 < msg.size() && msg[i + 1] == ' ') ++i;
        } else {
            out += msg[i];
        }
    }
    return out;
}

void write_json_file(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, j.dump(2) + "\n");
}

/// Loads the classifier at `path` when it exists, otherwise trains one and saves it there.
eval::OracleClassifier obtain_oracle(const sim::DatasetManifest& manifest, const fs::path& path,
                                     const eval::OracleConfig& cfg, std::ostream& out) {
    if (fs::exists(path)) {
        auto clf = eval::OracleClassifier::load(path);
        clf.require_gate();
        return clf;
    }
    out << "training oracle classifier -> " << path.string() << std::endl;
    auto clf = eval::train_oracle_classifier(manifest, cfg);
    clf.save(path);
    out << "oracle accuracy: action " << clf.action_accuracy << " material " << clf.material_accuracy << std::endl;
    return clf;
}

std::atomic<HttpServer*> g_server{nullptr};

extern "C" void on_signal(int) {
    if (auto* s = g_server.load()) s->stop();
}

struct Args {
    std::string config, out, dataset, ckpt, scene, gesture, report, oracle, oracle_config, split = "test", view = "front",
                                                                                           host = "127.0.0.1",
                                                                                           static_dir, mel_out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool resume = false;
    int port = 8080, workers = 2, max_clips = 0, steps = 0;
    long long max_steps = 0;
    double guidance = -1.0, duration = 0.0, timeout = 30.0;
    std::vector<std::uint64_t> seeds;
};

int cmd_dataset_gen(const Args& a, std::ostream& out) {
    sim::DatasetConfig cfg =
        a.config.empty() ? sim::DatasetConfig::desk() : dataset_config_from_json(load_json_file(a.config));
    if (a.seed_set) cfg.seed = a.seed;
    const fs::path dir = resolve_data_dir(a.out);
    const auto m = sim::generate_dataset(cfg, dir);
    out << "wrote " << m.entries.size() << " entries for " << cfg.n_scenes << " scenes to " << dir.string()
        << std::endl;
    return kExitOk;
}

int cmd_train(const Args& a, std::ostream& out) {
    RunConfig run = a.config.empty() ? RunConfig{} : run_config_from_json(load_json_file(a.config));
    if (a.seed_set) run.train.seed = a.seed;
    const auto manifest = sim::DatasetManifest::load(resolve_data_dir(a.dataset));
    flow::TrainOptions opts;
    opts.out = a.out;
    opts.log = a.out + ".log";
    opts.resume = a.resume;
    opts.max_steps = a.max_steps;
    eval::apply_variant(run.variant, run.model, opts);
    opts.on_epoch = [&out](const flow::EpochLog& e) {
        out << "epoch " << e.epoch << " step " << e.step << " lr " << e.lr << " train " << e.train_loss << " val "
            << e.val_loss << std::endl;
    };
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    const auto result = flow::train(manifest, run.train, run.model, opts);
    out << "best validation loss " << result.best_val_loss << "; checkpoint " << a.out << std::endl;
    return kExitOk;
}

int cmd_sample(const Args& a, std::ostream& out) {
    auto model = flow::FlowModel::load(a.ckpt);
    const auto scene = sim::scene_for(model.dataset, sim::seed_from_scene_id(a.scene));
    const auto gesture = sim::parse_gesture(a.gesture);
    const double duration = a.duration > 0.0 ? a.duration : model.dataset.clip_duration;
    const auto traj = sim::sample_trajectory(scene, gesture, derive_seed(a.seed, 0x7a11), duration);
    flow::SampleConfig cfg;
    cfg.seed = a.seed;
    if (a.steps > 0) cfg.steps = a.steps;
    if (a.guidance >= 0.0) cfg.guidance_scale = a.guidance;
    cfg.validate();
    const auto gen = flow::generate_sound(model, scene, traj, sim::parse_view(a.view), cfg);
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    dsp::write_wav(a.out, gen.waveform);
    if (!a.mel_out.empty()) dsp::write_mel(a.mel_out, gen.mel);
    out << "wrote " << a.out << " (" << std::fixed << std::setprecision(3) << gen.waveform.duration() << " s, "
        << gen.events.size() << " contact events)" << std::endl;
    return kExitOk;
}

eval::OracleConfig oracle_config(const Args& a) {
    eval::OracleConfig cfg;
    if (!a.oracle_config.empty()) cfg = oracle_config_from_json(load_json_file(a.oracle_config));
    return cfg;
}

int cmd_oracle(const Args& a, std::ostream& out) {
    const auto manifest = sim::DatasetManifest::load(resolve_data_dir(a.dataset));
    auto cfg = a.config.empty() ? eval::OracleConfig{} : oracle_config_from_json(load_json_file(a.config));
    if (a.seed_set) cfg.seed = a.seed;
    auto clf = eval::fit_oracle(manifest, cfg);
    clf.save(a.out);
    out << "oracle accuracy: action " << clf.action_accuracy << " material " << clf.material_accuracy << " on "
        << clf.n_heldout << " held-out clips; " << (clf.passes_gate() ? "passes" : "FAILS") << " the "
        << cfg.gate << " gate" << std::endl;
    return clf.passes_gate() ? kExitOk : kExitFailure;
}

eval::EvalOptions eval_options(const Args& a) {
    eval::EvalOptions opts;
    opts.sample.seed = a.seed;
    if (a.steps > 0) opts.sample.steps = a.steps;
    if (a.guidance >= 0.0) opts.sample.guidance_scale = a.guidance;
    opts.sample.validate();
    opts.split = a.split;
    opts.max_clips = a.max_clips;
    return opts;
}

int cmd_eval(const Args& a, std::ostream& out) {
    const fs::path data = resolve_data_dir(a.dataset);
    const auto manifest = sim::DatasetManifest::load(data);
    auto model = flow::FlowModel::load(a.ckpt);
    auto clf = obtain_oracle(manifest, a.oracle.empty() ? data / "oracle.ckpt" : fs::path(a.oracle), oracle_config(a),
                             out);
    auto opts = eval_options(a);
    const auto report = eval::evaluate(model, manifest, clf, opts);
    write_json_file(a.report, report);
    out << eval::reports_table({report}) << "wrote " << a.report << std::endl;
    return kExitOk;
}

int cmd_ablate(const Args& a, std::ostream& out) {
    const auto manifest = sim::DatasetManifest::load(resolve_data_dir(a.dataset));
    const RunConfig run = a.config.empty() ? RunConfig{} : run_config_from_json(load_json_file(a.config));
    eval::AblationPlan plan;
    plan.model = run.model;
    plan.train = run.train;
    if (!a.seeds.empty()) plan.seeds = a.seeds;
    const fs::path dir = a.out;
    fs::create_directories(dir);
    eval::train_ablation(manifest, dir, plan, [&out](const std::string& line) { out << line << std::endl; });
    auto clf = obtain_oracle(manifest, a.oracle.empty() ? dir / "oracle.ckpt" : fs::path(a.oracle), oracle_config(a),
                             out);
    const auto reports = eval::run_ablation_suite(manifest, dir, plan, clf, eval_options(a));
    const auto verdict = eval::ablation_verdict(reports);
    json vj = {{"material_drop", verdict.material_drop},
               {"action_drop", verdict.action_drop},
               {"visual_drops_material_most", verdict.visual_drops_material_most},
               {"hand_pose_drops_action_most", verdict.hand_pose_drops_action_most},
               {"synthetic_view_degrades", verdict.synthetic_view_degrades}};
    write_json_file(dir / "ablation.json", {{"reports", reports}, {"verdict", vj}});
    write_file_atomic(dir / "ablation.csv", eval::reports_csv(reports));
    out << eval::reports_table(reports) << "verdict: " << vj.dump() << std::endl;
    return kExitOk;
}

int cmd_serve(const Args& a, std::ostream& out) {
    const auto manifest = sim::DatasetManifest::load(resolve_data_dir(a.dataset));
    const auto model = flow::FlowModel::load(a.ckpt);
    ServiceOptions opts;
    opts.workers = a.workers;
    opts.timeout_s = a.timeout;
    opts.static_dir = a.static_dir;
    GenerationService service(model, hex64(fnv1a(read_file(a.ckpt))), manifest, opts);
    HttpServer server(service);
    const int port = server.bind(a.host, a.port);
    out << "listening on http://" << a.host << ":" << port << std::endl;
    g_server.store(&server);
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    server.listen();
    g_server.store(nullptr);
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    return kExitOk;
}

}  // namespace

json load_json_file(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
}

sim::DatasetConfig dataset_config_from_json(const json& j) {
    std::vector<std::string> errors;
    if (!j.is_object()) throw ConfigError("dataset config must be a JSON object");
    const auto base = read_preset(j, errors) == "reference" ? sim::DatasetConfig::reference() : sim::DatasetConfig::desk();
    json patch = j;
    patch.erase("preset");
    const auto cfg = overlay(base, patch, "", errors);
    if (!errors.empty()) throw_errors(errors);
    return cfg;
}

RunConfig run_config_from_json(const json& j) {
    std::vector<std::string> errors;
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    const bool reference = read_preset(j, errors) == "reference";
    RunConfig run;
    if (reference) {
        run.model = flow::ModelConfig::reference();
        run.train = flow::TrainConfig::reference();
    }
    for (const auto& [key, v] : j.items()) {
        if (key == "preset") continue;
        if (key == "model") {
            run.model = overlay(run.model, v, "model", errors);
        } else if (key == "train") {
            run.train = overlay(run.train, v, "train", errors);
        } else if (key == "variant") {
            const auto& names = eval::ablation_variants();
            if (!v.is_string() || std::find(names.begin(), names.end(), v.get<std::string>()) == names.end())
                errors.push_back("variant: must be one of full, no_visual, no_hand_pose, no_synthetic_view");
            else
                run.variant = v.get<std::string>();
        } else {
            errors.push_back(key + ": unknown field");
        }
    }
    if (!errors.empty()) throw_errors(errors);
    return run;
}

eval::OracleConfig oracle_config_from_json(const json& j) {
    std::vector<std::string> errors;
    const auto cfg = overlay(eval::OracleConfig{}, j, "", errors);
    if (!errors.empty()) throw_errors(errors);
    return cfg;
}

fs::path resolve_data_dir(const std::string& explicit_dir) {
    if (!explicit_dir.empty()) return explicit_dir;
    if (const char* env = std::getenv("HH_DATA_DIR"); env && *env) return env;
    throw ConfigError("no dataset directory: pass --dataset/--out or set HH_DATA_DIR");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hand-interaction sound generation: dataset, training, sampling, evaluation and serving", "hh"};
    app.require_subcommand(1);
    Args a;
    auto seed_opt = [&a](CLI::App* c) {
        c->add_option_function<std::uint64_t>(
            "--seed", [&a](const std::uint64_t& s) { a.seed = s, a.seed_set = true; }, "Seed for all randomness");
    };

    auto* dataset = app.add_subcommand("dataset", "Dataset commands");
    dataset->require_subcommand(1);
    auto* gen = dataset->add_subcommand("gen", "Generate a dataset");
    gen->add_option("--config", a.config, "Dataset config JSON (default: desk preset)")->check(CLI::ExistingFile);
    gen->add_option("--out", a.out, "Output directory (default: $HH_DATA_DIR)");
    seed_opt(gen);

    auto* train = app.add_subcommand("train", "Train a flow model");
    train->add_option("--dataset", a.dataset, "Dataset directory (default: $HH_DATA_DIR)");
    train->add_option("--config", a.config, "Run config JSON (default: desk preset)")->check(CLI::ExistingFile);
    train->add_option("--out", a.out, "Checkpoint path")->required();
    train->add_flag("--resume", a.resume, "Continue from <out>.resume");
    train->add_option("--max-steps", a.max_steps, "Stop after this many optimizer steps")->check(CLI::NonNegativeNumber);
    seed_opt(train);

    auto* sample = app.add_subcommand("sample", "Generate the sound of a simulated gesture");
    sample->add_option("--ckpt", a.ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
    sample->add_option("--scene", a.scene, "Scene id, e.g. scene_9")->required();
    sample->add_option("--gesture", a.gesture, "tap, knock, scratch, pat, slap, rub or drum")->required();
    sample->add_option("--out", a.out, "Output WAV")->required();
    sample->add_option("--mel", a.mel_out, "Also write the generated mel spectrogram");
    sample->add_option("--duration", a.duration, "Seconds (default: the dataset clip duration)");
    sample->add_option("--view", a.view, "front, top or side");
    sample->add_option("--steps", a.steps, "Euler steps")->check(CLI::PositiveNumber);
    sample->add_option("--guidance", a.guidance, "Guidance scale")->check(CLI::NonNegativeNumber);
    seed_opt(sample);

    auto* oracle = app.add_subcommand("oracle", "Train the oracle classifier");
    oracle->add_option("--dataset", a.dataset, "Dataset directory (default: $HH_DATA_DIR)");
    oracle->add_option("--config", a.config, "Oracle config JSON")->check(CLI::ExistingFile);
    oracle->add_option("--out", a.out, "Classifier checkpoint")->required();
    seed_opt(oracle);

    auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint on a held-out split");
    evalc->add_option("--ckpt", a.ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
    evalc->add_option("--dataset", a.dataset, "Dataset directory (default: $HH_DATA_DIR)");
    evalc->add_option("--report", a.report, "MetricReport JSON output")->required();
    evalc->add_option("--oracle", a.oracle, "Classifier checkpoint; trained and saved here if missing "
                                            "(default: <dataset>/oracle.ckpt)");
    evalc->add_option("--oracle-config", a.oracle_config, "Oracle config JSON used when training")
        ->check(CLI::ExistingFile);
    evalc->add_option("--split", a.split, "val or test")->check(CLI::IsMember({"val", "test"}));
    evalc->add_option("--max-clips", a.max_clips, "Evaluate only the first N clips")->check(CLI::NonNegativeNumber);
    evalc->add_option("--steps", a.steps, "Euler steps")->check(CLI::PositiveNumber);
    evalc->add_option("--guidance", a.guidance, "Guidance scale")->check(CLI::NonNegativeNumber);
    seed_opt(evalc);

    auto* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation variants over seeds");
    ablate->add_option("--dataset", a.dataset, "Dataset directory (default: $HH_DATA_DIR)");
    ablate->add_option("--out", a.out, "Output directory for checkpoints and reports")->required();
    ablate->add_option("--config", a.config, "Base run config JSON")->check(CLI::ExistingFile);
    ablate->add_option("--seeds", a.seeds, "Training seeds (default: 0 1 2)")->delimiter(',');
    ablate->add_option("--oracle", a.oracle, "Classifier checkpoint (default: <out>/oracle.ckpt)");
    ablate->add_option("--oracle-config", a.oracle_config, "Oracle config JSON used when training")
        ->check(CLI::ExistingFile);
    ablate->add_option("--max-clips", a.max_clips, "Evaluate only the first N clips")->check(CLI::NonNegativeNumber);
    seed_opt(ablate);

    auto* serve = app.add_subcommand("serve", "Serve the HTTP generation API");
    serve->add_option("--ckpt", a.ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
    serve->add_option("--dataset", a.dataset, "Dataset directory (default: $HH_DATA_DIR)");
    serve->add_option("--port", a.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", a.host, "Bind address");
    serve->add_option("--workers", a.workers, "Concurrent samplings")->check(CLI::Range(1, 64));
    serve->add_option("--timeout", a.timeout, "Per-request limit in seconds")->check(CLI::PositiveNumber);
    serve->add_option("--static", a.static_dir, "Static asset bundle served at /")->check(CLI::ExistingDirectory);

    if (!args.empty() && !args.front().empty() && args.front().front() != '-' &&
        !app.get_subcommand_no_throw(args.front())) {
        err << "error: unknown subcommand '" << args.front() << "'\n" << app.help();
        return kExitUsage;
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        for (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front(); sub;
             sub = sub->get_subcommands().empty() ? nullptr : sub->get_subcommands().front())
            target = sub;
        out << target->help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_dataset_gen(a, out);
        if (train->parsed()) return cmd_train(a, out);
        if (sample->parsed()) return cmd_sample(a, out);
        if (oracle->parsed()) return cmd_oracle(a, out);
        if (evalc->parsed()) return cmd_eval(a, out);
        if (ablate->parsed()) return cmd_ablate(a, out);
        if (serve->parsed()) return cmd_serve(a, out);
    } catch (const std::exception& e) {
        err << "error: " << one_line(e.what()) << std::endl;
        return kExitFailure;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace hh::service

#include "hh/flow/config.hpp"

#include <algorithm>

#include "hh/error.hpp"
#include "hh/schema.hpp"
#include "hh/util.hpp"

namespace hh::flow {

void VectorFieldConfig::validate() const {
    nlohmann::json j = *this;
    VectorFieldConfig tmp;
    from_json(j, tmp);
}

void to_json(nlohmann::json& j, const VectorFieldConfig& c) {
    j = {{"n_mels", c.n_mels},       {"base_channels", c.base_channels}, {"channel_mults", c.channel_mults},
         {"embed_dim", c.embed_dim}, {"time_dim", c.time_dim},           {"groups", c.groups}};
}

void read_config(SchemaReader& r, VectorFieldConfig& out) {
    r.integer("n_mels", out.n_mels, 1, 512);
    r.integer("base_channels", out.base_channels, 1, 1024);
    r.int_list("channel_mults", out.channel_mults, 1, 16);
    r.integer("embed_dim", out.embed_dim, 2, 4096);
    r.integer("time_dim", out.time_dim, 2, 4096);
    r.integer("groups", out.groups, 1, 1024);
    if (r.ok()) {
        if (out.time_dim % 2) r.error("time_dim", "must be even (sine and cosine halves)");
        if (out.channel_mults.size() > 6) r.error("channel_mults", "at most 6 stages");
        for (int i = 0; i < out.depth(); ++i)
            if (out.stage_channels(i) % out.groups) {
                r.error("groups", "must divide every stage's channel count");
                break;
            }
    }
}

void from_json(const nlohmann::json& j, VectorFieldConfig& c) {
    VectorFieldConfig out;
    SchemaReader r(j);
    read_config(r, out);
    r.finish();
    c = out;
}

ModelConfig ModelConfig::desk() {
    ModelConfig c;
    c.vf.n_mels = 40;
    c.vf.base_channels = 64;
    return c;
}

ModelConfig ModelConfig::reference() {
    ModelConfig c;
    c.vf.n_mels = 80;
    c.vf.base_channels = 64;
    return c;
}

void ModelConfig::validate() const {
    nlohmann::json j = *this;
    ModelConfig tmp;
    from_json(j, tmp);
}

std::string ModelConfig::hash() const { return hex64(fnv1a(nlohmann::json(*this).dump())); }

void to_json(nlohmann::json& j, const ModelConfig& c) { j = {{"vector_field", c.vf}, {"conditioning", c.cond}}; }

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig out;
    SchemaReader r(j);
    if (auto* v = r.object("vector_field")) read_config(*v, out.vf);
    if (auto* v = r.object("conditioning")) cond::read_config(*v, out.cond);
    if (r.ok() && out.vf.embed_dim != out.cond.embed_dim)
        r.error("conditioning.embed_dim", "must equal vector_field.embed_dim");
    r.finish();
    c = out;
}

TrainConfig TrainConfig::reference() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.batch_size = 16;
    return c;
}

void TrainConfig::validate() const {
    nlohmann::json j = *this;
    TrainConfig tmp;
    from_json(j, tmp);
}

std::string TrainConfig::hash() const { return hex64(fnv1a(nlohmann::json(*this).dump())); }

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"lr_init", c.lr_init},
         {"lr_peak", c.lr_peak},       {"warmup_steps", c.warmup_steps}, {"lr_final", c.lr_final},
         {"decay_epochs", c.decay_epochs}, {"dropout", c.dropout},   {"seed", c.seed},
         {"val_clips", c.val_clips}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig out;
    SchemaReader r(j);
    r.integer("epochs", out.epochs, 1, 100000);
    r.integer("batch_size", out.batch_size, 1, 100000);
    r.number("lr_init", out.lr_init, 0.0, 1.0);
    r.number("lr_peak", out.lr_peak, 0.0, 1.0, true);
    r.integer("warmup_steps", out.warmup_steps, 0, 100000000);
    r.number("lr_final", out.lr_final, 0.0, 1.0);
    r.integer("decay_epochs", out.decay_epochs, 0, 100000);
    r.number("dropout", out.dropout, 0.0, 1.0);
    r.uint64("seed", out.seed);
    r.integer("val_clips", out.val_clips, 0, 100000000);
    r.finish();
    c = out;
}

double learning_rate(const TrainConfig& c, std::int64_t step, int steps_per_epoch) {
    if (step < c.warmup_steps) return c.lr_init + (c.lr_peak - c.lr_init) * double(step) / c.warmup_steps;
    const double decay_steps = double(c.decay_epochs) * steps_per_epoch;
    const double into = double(step - c.warmup_steps);
    if (decay_steps <= 0 || into >= decay_steps) return c.lr_final;
    return c.lr_peak + (c.lr_final - c.lr_peak) * into / decay_steps;
}

void SampleConfig::validate() const {
    nlohmann::json j = *this;
    SampleConfig tmp;
    from_json(j, tmp);
}

void to_json(nlohmann::json& j, const SampleConfig& c) {
    j = {{"steps", c.steps},
         {"guidance_scale", c.guidance_scale},
         {"seed", c.seed},
         {"griffin_lim_iterations", c.griffin_lim_iterations}};
}

void from_json(const nlohmann::json& j, SampleConfig& c) {
    SampleConfig out;
    SchemaReader r(j);
    r.integer("steps", out.steps, 1, 10000);
    r.number("guidance_scale", out.guidance_scale, 0.0, 100.0);
    r.uint64("seed", out.seed);
    r.integer("griffin_lim_iterations", out.griffin_lim_iterations, 1, 10000);
    r.finish();
    c = out;
}

}  // namespace hh::flow

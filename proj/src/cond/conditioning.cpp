#include "hh/cond/conditioning.hpp"

#include <algorithm>
#include <cmath>

#include "hh/error.hpp"
#include "hh/schema.hpp"
#include "hh/util.hpp"

namespace hh::cond {

using ad::Tensor;
using ad::Var;

void CondConfig::validate() const {
    nlohmann::json j = *this;
    CondConfig tmp;
    from_json(j, tmp);
}

void to_json(nlohmann::json& j, const CondConfig& c) {
    j = {{"embed_dim", c.embed_dim},       {"encoder_channels", c.encoder_channels},
         {"frame_rate", c.frame_rate},     {"action_rate", c.action_rate},
         {"use_visual", c.use_visual},     {"use_action", c.use_action}};
}

void read_config(SchemaReader& r, CondConfig& out) {
    r.integer("embed_dim", out.embed_dim, 2, 4096);
    std::vector<int> channels(out.encoder_channels.begin(), out.encoder_channels.end());
    r.int_list("encoder_channels", channels, 1, 1024, 4);
    std::copy(channels.begin(), channels.end(), out.encoder_channels.begin());
    r.number("frame_rate", out.frame_rate, 0.0, 30.0, true);
    r.number("action_rate", out.action_rate, 0.0, 1000.0, true);
    r.boolean("use_visual", out.use_visual);
    r.boolean("use_action", out.use_action);
    if (r.ok() && out.embed_dim % 2 != 0) r.error("embed_dim", "must be even (global and local halves)");
    if (r.ok() && out.action_rate != sim::kTrajectoryRate) r.error("action_rate", "trajectories are sampled at 30 Hz");
}

void from_json(const nlohmann::json& j, CondConfig& c) {
    CondConfig out;
    SchemaReader r(j);
    read_config(r, out);
    r.finish();
    c = out;
}

template <typename T>
void init_conditioning(ad::ParamStore<T>& store, const CondConfig& cfg, std::mt19937_64& rng) {
    if (cfg.use_action) ad::init_linear(store, "cond/action", kPoseDim, cfg.embed_dim, rng);
    if (cfg.use_visual) {
        int cin = 3;
        for (int i = 0; i < 4; ++i) {
            ad::init_conv2d(store, "cond/view/conv" + std::to_string(i), cin, cfg.encoder_channels[i], 3, rng);
            cin = cfg.encoder_channels[i];
        }
        ad::init_linear(store, "cond/view/proj", cin, cfg.embed_dim / 2, rng);
    }
}

template <typename T>
Tensor<T> pose_matrix(const sim::HandTrajectory& traj) {
    const int n = traj.n_frames();
    Tensor<T> out({kPoseDim, n});
    for (int f = 0; f < n; ++f)
        for (int h = 0; h < sim::kHands; ++h)
            for (int k = 0; k < sim::kKeypoints; ++k)
                for (int c = 0; c < 3; ++c)
                    out.data[static_cast<std::size_t>((h * sim::kKeypoints + k) * 3 + c) * n + f] =
                        static_cast<T>(traj.poses[f].keypoints[h][k][c]);
    return out;
}

template <typename T>
Tensor<T> raster_tensor(const sim::Raster& r) {
    Tensor<T> out({r.channels, r.height, r.width});
    for (int c = 0; c < r.channels; ++c)
        for (int y = 0; y < r.height; ++y)
            for (int x = 0; x < r.width; ++x)
                out.data[(static_cast<std::size_t>(c) * r.height + y) * r.width + x] = static_cast<T>(2 * r.at(y, x, c) - 1);
    return out;
}

template <typename T>
Var<T> encode_action(ad::Tape<T>& tape, ad::ParamStore<T>& store, const CondConfig& cfg, const Tensor<T>& poses) {
    if (poses.rank() != 2 || poses.dim(0) != kPoseDim)
        throw ConfigError("action input must be [126 x n], got " + ad::shape_str(poses.shape));
    const int n = poses.dim(1);
    auto& w = store.get("cond/action/w");
    if (w.value.dim(0) != cfg.embed_dim || w.value.dim(1) != kPoseDim)
        throw ConfigError("action projection is " + ad::shape_str(w.value.shape) + ", expected [" +
                          std::to_string(cfg.embed_dim) + "x126]");
    Tensor<T> mask({cfg.embed_dim, n});
    for (int f = 0; f < n; ++f) {
        bool nonzero = false;
        for (int i = 0; i < kPoseDim && !nonzero; ++i) nonzero = poses.data[static_cast<std::size_t>(i) * n + f] != T(0);
        if (nonzero)
            for (int d = 0; d < cfg.embed_dim; ++d) mask.data[static_cast<std::size_t>(d) * n + f] = T(1);
    }
    const auto proj = ad::linear_layer(tape, store, "cond/action", tape.constant(poses));
    return ad::mul(ad::l2_normalize_columns(proj), tape.constant(std::move(mask)));
}

template <typename T>
Var<T> encode_view(ad::Tape<T>& tape, ad::ParamStore<T>& store, const CondConfig& cfg, const Tensor<T>& view) {
    if (view.rank() != 3 || view.dim(0) != 3 || view.dim(1) < 16 || view.dim(2) < 16)
        throw ValidationError("view raster must be [3 x H x W] with H, W >= 16, got " + ad::shape_str(view.shape), "views");
    Var<T> h = tape.constant(view);
    for (int i = 0; i < 4; ++i) h = ad::silu(ad::conv2d_layer(tape, store, "cond/view/conv" + std::to_string(i), h, 2, 1));
    const int c = h.shape()[0];
    h = ad::mean_axis(ad::reshape(h, {c, h.shape()[1] * h.shape()[2]}), 1);
    (void)cfg;
    return ad::linear_layer(tape, store, "cond/view/proj", h);
}

template <typename T>
Var<T> encode_frames(ad::Tape<T>& tape, ad::ParamStore<T>& store, const CondConfig& cfg,
                     const std::vector<Tensor<T>>& global_views, const std::vector<Tensor<T>>& local_views) {
    if (global_views.size() != local_views.size() || global_views.empty())
        throw ValidationError("need equal, non-zero counts of global and local views (got " +
                                  std::to_string(global_views.size()) + " and " + std::to_string(local_views.size()) + ")",
                              "views");
    std::vector<Var<T>> cols;
    for (std::size_t f = 0; f < global_views.size(); ++f)
        cols.push_back(ad::concat<T>({encode_view(tape, store, cfg, global_views[f]), encode_view(tape, store, cfg, local_views[f])}, 0));
    return cols.size() == 1 ? cols[0] : ad::concat(cols, 1);
}

std::vector<int> nearest_indices(int n_out, double rate_out, int n_in, double rate_in) {
    if (n_out < 0 || n_in < 1 || !(rate_out > 0) || !(rate_in > 0))
        throw ValidationError("nearest-neighbour upsampling needs a non-empty source and positive rates");
    std::vector<int> idx(n_out);
    for (int j = 0; j < n_out; ++j)
        idx[j] = static_cast<int>(std::clamp<long>(round_half_up(j * rate_in / rate_out), 0, n_in - 1));
    return idx;
}

template <typename T>
Var<T> upsample(ad::Tape<T>& tape, Var<T> x, const std::vector<int>& idx) {
    const int n_in = x.shape().at(1), n_out = static_cast<int>(idx.size());
    Tensor<T> sel({n_in, n_out});
    for (int j = 0; j < n_out; ++j) sel.data[static_cast<std::size_t>(idx[j]) * n_out + j] = T(1);
    return ad::matmul(x, tape.constant(std::move(sel)));
}

template <typename T>
Var<T> fuse(ad::Tape<T>& tape, const CondConfig& cfg, Var<T> frames, Var<T> actions, int n_spec, double spec_rate) {
    if (n_spec < 1) throw ValidationError("conditioning needs at least one spectrogram frame");
    const double target = (n_spec - 1) / spec_rate;
    Var<T> out;
    auto add_stream = [&](Var<T> s, double rate, const char* what) {
        if (s.id < 0) return;
        if (s.shape().size() != 2 || s.shape()[0] != cfg.embed_dim)
            throw ValidationError(std::string(what) + " stream must be [" + std::to_string(cfg.embed_dim) + " x n], got " +
                                      ad::shape_str(s.shape()),
                                  what);
        const int n = s.shape()[1];
        if (std::abs(n / rate - target) > 1.0 / rate + 1e-9)
            throw ValidationError(std::string(what) + " stream covers " + std::to_string(n / rate) + " s but the target covers " +
                                      std::to_string(target) + " s",
                                  what);
        const auto up = upsample(tape, s, nearest_indices(n_spec, spec_rate, n, rate));
        out = out.id < 0 ? up : ad::add(out, up);
    };
    add_stream(frames, cfg.frame_rate, "frames");
    add_stream(actions, cfg.action_rate, "actions");
    if (out.id < 0) out = tape.constant(Tensor<T>({cfg.embed_dim, n_spec}));
    return out;
}

bool dropout_decision(double p, std::uint64_t seed) {
    if (!(p >= 0 && p <= 1)) throw ValidationError("dropout probability must be in [0, 1]", "p");
    std::mt19937_64 rng(derive_seed(seed, 0xd50));
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

ConditioningSequence condition_dropout(ConditioningSequence c, double p, std::uint64_t seed) {
    if (dropout_decision(p, seed)) {
        std::fill(c.vectors.data.begin(), c.vectors.data.end(), 0.0f);
        c.dropout_applied = true;
    }
    return c;
}

template <typename T>
ClipConditioningInput<T> prepare_inputs(const sim::HandTrajectory& traj, const std::vector<sim::Views>& views) {
    ClipConditioningInput<T> in;
    in.poses = pose_matrix<T>(traj);
    for (const auto& v : views) {
        in.global_views.push_back(raster_tensor<T>(v.global));
        in.local_views.push_back(raster_tensor<T>(v.local));
    }
    return in;
}

template <typename T>
Var<T> build_conditioning(ad::Tape<T>& tape, ad::ParamStore<T>& store, const CondConfig& cfg,
                          const ClipConditioningInput<T>& in, int n_spec, double spec_rate) {
    Var<T> frames, actions;
    if (cfg.use_visual) frames = encode_frames(tape, store, cfg, in.global_views, in.local_views);
    if (cfg.use_action) actions = encode_action(tape, store, cfg, in.poses);
    return fuse(tape, cfg, frames, actions, n_spec, spec_rate);
}

ConditioningSequence conditioning_sequence(ad::ParamStore<float>& store, const CondConfig& cfg,
                                           const ClipConditioningInput<float>& in, int n_spec, double spec_rate) {
    ad::Tape<float> tape(false);
    const auto c = build_conditioning(tape, store, cfg, in, n_spec, spec_rate);
    ConditioningSequence out;
    out.rate = spec_rate;
    out.vectors = Matrix<float>(n_spec, cfg.embed_dim);
    for (int d = 0; d < cfg.embed_dim; ++d)
        for (int j = 0; j < n_spec; ++j) out.vectors(j, d) = c.value().data[static_cast<std::size_t>(d) * n_spec + j];
    return out;
}

#define HH_INSTANTIATE(T)                                                                                                 \
    template void init_conditioning(ad::ParamStore<T>&, const CondConfig&, std::mt19937_64&);                             \
    template Tensor<T> pose_matrix(const sim::HandTrajectory&);                                                           \
    template Tensor<T> raster_tensor(const sim::Raster&);                                                                 \
    template Var<T> encode_action(ad::Tape<T>&, ad::ParamStore<T>&, const CondConfig&, const Tensor<T>&);                 \
    template Var<T> encode_view(ad::Tape<T>&, ad::ParamStore<T>&, const CondConfig&, const Tensor<T>&);                   \
    template Var<T> encode_frames(ad::Tape<T>&, ad::ParamStore<T>&, const CondConfig&, const std::vector<Tensor<T>>&,     \
                                  const std::vector<Tensor<T>>&);                                                         \
    template Var<T> upsample(ad::Tape<T>&, Var<T>, const std::vector<int>&);                                              \
    template Var<T> fuse(ad::Tape<T>&, const CondConfig&, Var<T>, Var<T>, int, double);                                   \
    template ClipConditioningInput<T> prepare_inputs(const sim::HandTrajectory&, const std::vector<sim::Views>&);         \
    template Var<T> build_conditioning(ad::Tape<T>&, ad::ParamStore<T>&, const CondConfig&, const ClipConditioningInput<T>&, \
                                       int, double);

HH_INSTANTIATE(float)
HH_INSTANTIATE(double)

}  // namespace hh::cond

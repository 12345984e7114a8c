#include "hh/ad/checkpoint.hpp"

#include <cstring>

#include "hh/error.hpp"
#include "hh/util.hpp"

namespace hh::ad {

namespace {

template <typename U>
void put(std::string& out, U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out.append(buf, sizeof(U));
}

template <typename U>
U get(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(U) > in.size()) throw IoError("checkpoint truncated in header");
    U v;
    std::memcpy(&v, in.data() + pos, sizeof(U));
    pos += sizeof(U);
    return v;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
    nlohmann::json table = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        table.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
        offset += t.size() * sizeof(float);
    }
    const nlohmann::json header = {{"metadata", ckpt.metadata}, {"tensors", table}};
    const std::string text = header.dump();

    std::string out(kCheckpointMagic, 4);
    put(out, kCheckpointVersion);
    put(out, static_cast<std::uint64_t>(text.size()));
    out += text;
    for (const auto& [name, t] : ckpt.tensors)
        out.append(reinterpret_cast<const char*>(t.data.data()), t.size() * sizeof(float));
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw IncompatibleError("not a checkpoint file (bad magic)");
    std::size_t pos = 4;
    const auto version = get<std::uint32_t>(bytes, pos);
    if (version != kCheckpointVersion)
        throw IncompatibleError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                                std::to_string(kCheckpointVersion) + ")");
    const auto len = get<std::uint64_t>(bytes, pos);
    if (len > bytes.size() - pos) throw IoError("checkpoint truncated in header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(pos, len));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    pos += len;
    const std::size_t payload = pos;

    Checkpoint ckpt;
    try {
        ckpt.metadata = header.at("metadata");
        for (const auto& entry : header.at("tensors")) {
            Shape shape = entry.at("shape").get<Shape>();
            const auto offset = entry.at("offset").get<std::uint64_t>();
            const std::size_t n = numel(shape);
            if (payload + offset + n * sizeof(float) > bytes.size())
                throw IoError("checkpoint truncated in tensor " + entry.at("name").get<std::string>());
            std::vector<float> data(n);
            std::memcpy(data.data(), bytes.data() + payload + offset, n * sizeof(float));
            ckpt.tensors.emplace(entry.at("name").get<std::string>(), Tensor<float>(std::move(shape), std::move(data)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed checkpoint header: ") + e.what());
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void store_params(Checkpoint& ckpt, const ParamStore<float>& params, const AdamState<float>* adam) {
    for (const auto& [name, p] : params.items()) {
        ckpt.tensors[name] = p.value;
        if (!adam) continue;
        auto m = adam->m.find(name);
        auto v = adam->v.find(name);
        if (m != adam->m.end() && v != adam->v.end()) {
            ckpt.tensors["adam/m/" + name] = Tensor<float>(p.value.shape, m->second);
            ckpt.tensors["adam/v/" + name] = Tensor<float>(p.value.shape, v->second);
        }
    }
    if (adam) {
        ckpt.metadata["adam"] = {{"step", adam->step},
                                 {"beta1", adam->cfg.beta1},
                                 {"beta2", adam->cfg.beta2},
                                 {"eps", adam->cfg.eps}};
    }
}

void restore_params(const Checkpoint& ckpt, ParamStore<float>& params, AdamState<float>* adam) {
    // Validate everything before touching `params` so a failure leaves them intact.
    for (const auto& [name, p] : params.items()) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) throw IncompatibleError("checkpoint is missing parameter " + name);
        if (it->second.shape != p.value.shape)
            throw IncompatibleError("parameter " + name + " has shape " + shape_str(it->second.shape) +
                                    " in checkpoint but " + shape_str(p.value.shape) + " in model");
    }
    for (auto& [name, p] : params.items()) {
        p.value = ckpt.tensors.at(name);
        p.zero_grad();
    }
    if (!adam) return;
    *adam = AdamState<float>{};
    if (ckpt.metadata.contains("adam")) {
        const auto& a = ckpt.metadata["adam"];
        adam->step = a.at("step").get<std::int64_t>();
        adam->cfg = {a.at("beta1").get<double>(), a.at("beta2").get<double>(), a.at("eps").get<double>()};
    }
    for (const auto& [name, p] : params.items()) {
        auto m = ckpt.tensors.find("adam/m/" + name);
        auto v = ckpt.tensors.find("adam/v/" + name);
        if (m != ckpt.tensors.end() && v != ckpt.tensors.end()) {
            adam->m[name] = m->second.data;
            adam->v[name] = v->second.data;
        }
    }
}

void require_config_hash(const Checkpoint& ckpt, const std::string& expected) {
    const std::string found = ckpt.metadata.value("config_hash", std::string("<none>"));
    if (found != expected)
        throw IncompatibleError("config hash mismatch: checkpoint has " + found + ", current config is " + expected);
}

}  // namespace hh::ad

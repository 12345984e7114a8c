#include "hh/schema.hpp"

#include <algorithm>
#include <cmath>

#include "hh/error.hpp"

namespace hh {

SchemaReader::SchemaReader(const nlohmann::json& j, std::string prefix)
    : SchemaReader(j, std::move(prefix), std::make_shared<std::vector<std::string>>()) {
    if (!j.is_object()) errors_->push_back((prefix_.empty() ? std::string("config") : prefix_) + ": must be an object");
}

SchemaReader::SchemaReader(const nlohmann::json& j, std::string prefix, std::shared_ptr<std::vector<std::string>> errors)
    : j_(j), prefix_(std::move(prefix)), errors_(std::move(errors)) {}

std::string SchemaReader::path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

void SchemaReader::error(const std::string& key, const std::string& message) {
    errors_->push_back(path(key) + ": " + message);
}

const nlohmann::json* SchemaReader::field(const std::string& key) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    return &j_.at(key);
}

void SchemaReader::integer(const std::string& key, int& out, long min, long max) {
    const auto* v = field(key);
    if (!v) return;
    if (!v->is_number_integer()) return error(key, "must be an integer");
    const auto x = v->get<long long>();
    if (x < min || x > max)
        return error(key, "must be in [" + std::to_string(min) + ", " + std::to_string(max) + "], got " + std::to_string(x));
    out = static_cast<int>(x);
}

void SchemaReader::uint64(const std::string& key, std::uint64_t& out) {
    const auto* v = field(key);
    if (!v) return;
    if (!v->is_number_unsigned()) return error(key, "must be a non-negative integer");
    out = v->get<std::uint64_t>();
}

void SchemaReader::number(const std::string& key, double& out, double min, double max, bool exclusive_min) {
    const auto* v = field(key);
    if (!v) return;
    if (!v->is_number()) return error(key, "must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || x < min || x > max || (exclusive_min && x == min))
        return error(key, std::string("must be in ") + (exclusive_min ? "(" : "[") + nlohmann::json(min).dump() + ", " +
                              nlohmann::json(max).dump() + "], got " + nlohmann::json(x).dump());
    out = x;
}

void SchemaReader::int_list(const std::string& key, std::vector<int>& out, long min, long max, std::size_t size) {
    const auto* v = field(key);
    if (!v) return;
    const std::string want = size ? "an array of " + std::to_string(size) + " integers" : "a non-empty integer array";
    if (!v->is_array() || v->empty() || (size && v->size() != size)) return error(key, "must be " + want);
    std::vector<int> vals;
    for (const auto& e : *v) {
        if (!e.is_number_integer()) return error(key, "must be " + want);
        const auto x = e.get<long long>();
        if (x < min || x > max)
            return error(key, "entries must be in [" + std::to_string(min) + ", " + std::to_string(max) + "], got " +
                                  std::to_string(x));
        vals.push_back(static_cast<int>(x));
    }
    out = std::move(vals);
}

void SchemaReader::boolean(const std::string& key, bool& out) {
    const auto* v = field(key);
    if (!v) return;
    if (!v->is_boolean()) return error(key, "must be true or false");
    out = v->get<bool>();
}

void SchemaReader::string(const std::string& key, std::string& out, const std::vector<std::string>& allowed) {
    const auto* v = field(key);
    if (!v) return;
    if (!v->is_string()) return error(key, "must be a string");
    const auto s = v->get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end())
        return error(key, "unknown value '" + s + "'");
    out = s;
}

void SchemaReader::string_list(const std::string& key, std::vector<std::string>& out,
                               const std::vector<std::string>& allowed, bool unique, std::size_t min_size) {
    const auto* v = field(key);
    if (!v) return;
    if (!v->is_array()) return error(key, "must be an array of strings");
    std::vector<std::string> items;
    bool bad = false;
    for (std::size_t i = 0; i < v->size(); ++i) {
        const auto& item = (*v)[i];
        const std::string k = key + "[" + std::to_string(i) + "]";
        if (!item.is_string()) {
            error(k, "must be a string");
            bad = true;
            continue;
        }
        const auto s = item.get<std::string>();
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            error(k, "unknown value '" + s + "'");
            bad = true;
        } else if (unique && std::find(items.begin(), items.end(), s) != items.end()) {
            error(k, "duplicate value '" + s + "'");
            bad = true;
        }
        items.push_back(s);
    }
    if (items.size() < min_size) {
        error(key, "needs at least " + std::to_string(min_size) + " entries");
        bad = true;
    }
    if (!bad) out = std::move(items);
}

SchemaReader* SchemaReader::object(const std::string& key) {
    const auto* v = field(key);
    if (!v) return nullptr;
    if (!v->is_object()) {
        error(key, "must be an object");
        return nullptr;
    }
    children_.push_back(std::unique_ptr<SchemaReader>(new SchemaReader(*v, path(key), errors_)));
    return children_.back().get();
}

void SchemaReader::check_unknown() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
        if (!seen_.count(k)) error(k, "unknown field");
    for (auto& c : children_) c->check_unknown();
}

void SchemaReader::finish() {
    check_unknown();
    if (errors_->empty()) return;
    std::string msg = "invalid configuration (" + std::to_string(errors_->size()) + " field" +
                      (errors_->size() == 1 ? "" : "s") + "):";
    for (const auto& e : *errors_) msg += "\n  " + e;
    throw ConfigError(msg);
}

}  // namespace hh

#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hh {

/// Reads a JSON config object field by field, collecting every violation instead of stopping at
/// the first. Fields not read are reported as unknown by finish(), which throws ConfigError with
/// one line per offending field.
class SchemaReader {
public:
    explicit SchemaReader(const nlohmann::json& j, std::string prefix = {});

    void integer(const std::string& key, int& out, long min, long max);
    void uint64(const std::string& key, std::uint64_t& out);
    void number(const std::string& key, double& out, double min, double max, bool exclusive_min = false);
    void boolean(const std::string& key, bool& out);
    void string(const std::string& key, std::string& out, const std::vector<std::string>& allowed = {});
    void string_list(const std::string& key, std::vector<std::string>& out, const std::vector<std::string>& allowed,
                     bool unique = true, std::size_t min_size = 1);
    /// Integer array; `size` 0 accepts any non-empty length.
    void int_list(const std::string& key, std::vector<int>& out, long min, long max, std::size_t size = 0);
    /// Child reader for a nested object (owned by this reader), or nullptr if absent or invalid.
    SchemaReader* object(const std::string& key);

    void error(const std::string& key, const std::string& message);
    bool ok() const { return errors_->empty(); }
    void finish();

private:
    SchemaReader(const nlohmann::json& j, std::string prefix, std::shared_ptr<std::vector<std::string>> errors);
    const nlohmann::json* field(const std::string& key);
    std::string path(const std::string& key) const;
    void check_unknown();

    const nlohmann::json& j_;
    std::string prefix_;
    std::shared_ptr<std::vector<std::string>> errors_;
    std::set<std::string> seen_;
    std::vector<std::unique_ptr<SchemaReader>> children_;
};

}  // namespace hh

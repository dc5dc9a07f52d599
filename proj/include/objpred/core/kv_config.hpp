#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace objpred {

/// Flat `key = value` configuration. Lines starting with '#' are comments;
/// keys are dotted paths such as `world.num_blocks` or `train.c1`.
class KeyValueConfig {
public:
    static KeyValueConfig load(const std::filesystem::path& path);
    static KeyValueConfig parse(const std::string& text);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    [[nodiscard]] bool contains(const std::string& key) const { return values_.count(key) != 0; }
    [[nodiscard]] std::optional<std::string> get(const std::string& key) const;

    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
    [[nodiscard]] double get_double(const std::string& key, double fallback) const;
    [[nodiscard]] long long get_int(const std::string& key, long long fallback) const;
    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;

    /// Overrides keys from environment variables: `<prefix>WORLD_NUM_BLOCKS`
    /// sets `world.num_blocks`. Only keys already present are considered.
    void apply_env(const std::string& prefix);

    /// Layers `other` on top of this config.
    void merge(const KeyValueConfig& other);

    [[nodiscard]] std::string serialize() const;
    void save(const std::filesystem::path& path) const;

    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// `world.num_blocks` -> `WORLD_NUM_BLOCKS`.
std::string env_name_for_key(const std::string& key);

}  // namespace objpred

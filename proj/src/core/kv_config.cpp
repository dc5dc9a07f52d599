#include "objpred/core/kv_config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "objpred/core/types.hpp"

namespace objpred {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return s.substr(b, e - b);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) {
            throw InvalidConfig("config line " + std::to_string(line_no) + ": empty key");
        }
        cfg.values_[key] = trim(t.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read config '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        if (used != v->size()) {
            throw std::invalid_argument(*v);
        }
        return d;
    } catch (const std::exception&) {
        throw InvalidConfig("config key '" + key + "': '" + *v + "' is not a number");
    }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    try {
        std::size_t used = 0;
        const long long i = std::stoll(*v, &used);
        if (used != v->size()) {
            throw std::invalid_argument(*v);
        }
        return i;
    } catch (const std::exception&) {
        throw InvalidConfig("config key '" + key + "': '" + *v + "' is not an integer");
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    if (*v == "true" || *v == "1" || *v == "yes") {
        return true;
    }
    if (*v == "false" || *v == "0" || *v == "no") {
        return false;
    }
    throw InvalidConfig("config key '" + key + "': '" + *v + "' is not a boolean");
}

std::string env_name_for_key(const std::string& key) {
    std::string out;
    out.reserve(key.size());
    for (const char c : key) {
        out.push_back(c == '.' || c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

void KeyValueConfig::apply_env(const std::string& prefix) {
    for (auto& [key, value] : values_) {
        if (const char* env = std::getenv((prefix + env_name_for_key(key)).c_str())) {
            value = env;
        }
    }
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
    for (const auto& [k, v] : other.values_) {
        values_[k] = v;
    }
}

std::string KeyValueConfig::serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) {
        out << k << " = " << v << '\n';
    }
    return out.str();
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write config '" + path.string() + "'");
    }
    out << serialize();
}

}  // namespace objpred

#ifndef ELAB_CONFIG_HPP
#define ELAB_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace elab {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat "key = value" text configuration. Keys serialize sorted, so the
// format round-trips losslessly and diffs stay meaningful. CLI flags map
// one-to-one onto keys (--batch-size <-> batch_size).
class Config {
public:
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    void set_default(const std::string& key, const std::string& value) {
        kv_.emplace(key, value);
    }

    void erase(const std::string& key) { kv_.erase(key); }

    const std::map<std::string, std::string>& entries() const { return kv_; }

    std::string get(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("missing config key: " + key);
        return it->second;
    }

    std::string get(const std::string& key, const std::string& fallback) const {
        const auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const {
        const std::string raw = get(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not a number: " + raw);
        }
    }

    long long get_int(const std::string& key) const {
        const std::string raw = get(key);
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not an integer: " + raw);
        }
    }

    std::uint64_t get_u64(const std::string& key) const {
        const std::string raw = get(key);
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not an unsigned integer: " + raw);
        }
    }

    bool get_bool(const std::string& key) const {
        const std::string raw = get(key);
        if (raw == "true" || raw == "1") return true;
        if (raw == "false" || raw == "0") return false;
        throw ConfigError("config key " + key + " is not a boolean: " + raw);
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError("config key " + key + " has a non-numeric entry: " + item);
            }
        }
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& key) const {
        std::vector<std::string> out;
        std::stringstream ss(get(key));
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
        return out;
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : kv_) {
            out += k;
            out += " = ";
            out += v;
            out += "\n";
        }
        return out;
    }

    static Config parse_text(const std::string& text) {
        Config c;
        std::stringstream ss(text);
        std::string line;
        int line_no = 0;
        while (std::getline(ss, line)) {
            ++line_no;
            const std::string trimmed = trim(line);
            if (trimmed.empty() || trimmed[0] == '#') continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) + " has no '='");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(line_no) + " has an empty key");
            c.kv_[key] = value;
        }
        return c;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str());
    }

    friend bool operator==(const Config& a, const Config& b) { return a.kv_ == b.kv_; }

private:
    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r");
        return s.substr(begin, end - begin + 1);
    }

    std::map<std::string, std::string> kv_;
};

}  // namespace elab

#endif  // ELAB_CONFIG_HPP

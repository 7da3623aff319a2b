#pragma once

// Tiny sectioned key=value text format used for resolved run configs
// and the checkpoint config block. Round-trips deterministically:
// sections and keys keep insertion order.

#include <cstdio>
#include <fstream>

#include "tcif/core.hpp"

namespace tcif::kv {

inline std::string format_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Doc {
public:
    void set(const std::string& section, const std::string& key, std::string value) {
        auto& sec = section_ref(section);
        for (auto& [k, v] : sec.second)
            if (k == key) {
                v = std::move(value);
                return;
            }
        sec.second.emplace_back(key, std::move(value));
    }

    void set_i64(const std::string& s, const std::string& k, int64_t v) {
        set(s, k, std::to_string(v));
    }
    void set_f64(const std::string& s, const std::string& k, double v) {
        set(s, k, format_f64(v));
    }
    void set_bool(const std::string& s, const std::string& k, bool v) {
        set(s, k, v ? "true" : "false");
    }

    const std::string* find(const std::string& section, const std::string& key) const {
        for (const auto& sec : sections_)
            if (sec.first == section)
                for (const auto& [k, v] : sec.second)
                    if (k == key) return &v;
        return nullptr;
    }

    bool has_section(const std::string& section) const {
        for (const auto& sec : sections_)
            if (sec.first == section) return true;
        return false;
    }

    std::string get(const std::string& section, const std::string& key) const {
        const std::string* v = find(section, key);
        if (!v) throw ConfigError("missing config key [" + section + "] " + key);
        return *v;
    }

    int64_t get_i64(const std::string& s, const std::string& k) const {
        return std::stoll(get(s, k));
    }
    double get_f64(const std::string& s, const std::string& k) const {
        return std::stod(get(s, k));
    }
    bool get_bool(const std::string& s, const std::string& k) const {
        const std::string v = get(s, k);
        if (v == "true") return true;
        if (v == "false") return false;
        throw ConfigError("boolean expected for [" + s + "] " + k + ", got '" + v + "'");
    }

    int64_t get_i64_or(const std::string& s, const std::string& k, int64_t d) const {
        const std::string* v = find(s, k);
        return v ? std::stoll(*v) : d;
    }
    double get_f64_or(const std::string& s, const std::string& k, double d) const {
        const std::string* v = find(s, k);
        return v ? std::stod(*v) : d;
    }
    bool get_bool_or(const std::string& s, const std::string& k, bool d) const {
        const std::string* v = find(s, k);
        if (!v) return d;
        if (*v == "true") return true;
        if (*v == "false") return false;
        throw ConfigError("boolean expected for [" + s + "] " + k + ", got '" + *v + "'");
    }

    std::string to_text() const {
        std::ostringstream os;
        for (const auto& sec : sections_) {
            os << "[" << sec.first << "]\n";
            for (const auto& [k, v] : sec.second) os << k << " = " << v << "\n";
        }
        return os.str();
    }

    static Doc parse(const std::string& text) {
        Doc d;
        std::istringstream is(text);
        std::string line, section;
        size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty() || line[0] == '#') continue;
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                d.section_ref(section);
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config parse error at line " + std::to_string(lineno) +
                                  ": '" + line + "'");
            d.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return d;
    }

    static Doc load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file " + path);
        std::ostringstream os;
        os << f.rdbuf();
        return parse(os.str());
    }

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw Error("cannot write " + path);
        f << to_text();
    }

private:
    using Section = std::pair<std::string, std::vector<std::pair<std::string, std::string>>>;

    Section& section_ref(const std::string& name) {
        for (auto& sec : sections_)
            if (sec.first == name) return sec;
        sections_.emplace_back(name, std::vector<std::pair<std::string, std::string>>{});
        return sections_.back();
    }

    std::vector<Section> sections_;
};

inline std::vector<int64_t> parse_i64_list(const std::string& s) {
    std::vector<int64_t> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) out.push_back(std::stoll(item));
    return out;
}

inline std::string format_i64_list(const std::vector<int64_t>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

}  // namespace tcif::kv

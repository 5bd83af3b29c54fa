#pragma once

// Experiment configuration: one structured key = value text file per
// experiment. Lines are "key = value"; '#' starts a comment; keys use
// dotted sections (grid.n, solve.dt, ...). The full resolved map is
// embedded in every report for provenance.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kdvlab/grid.hpp"

namespace kdvlab {

class ExperimentConfig {
public:
    static ExperimentConfig fromFile(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("config: cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return fromString(ss.str());
    }

    static ExperimentConfig fromString(const std::string& text) {
        ExperimentConfig cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineNo = 0;
        while (std::getline(in, line)) {
            ++lineNo;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            auto eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t\r") != std::string::npos)
                    throw ValidationError("config: line " + std::to_string(lineNo) + " is not 'key = value'");
                continue;
            }
            std::string key = trim(line.substr(0, eq));
            std::string val = trim(line.substr(eq + 1));
            if (key.empty()) throw ValidationError("config: empty key on line " + std::to_string(lineNo));
            cfg.values_[key] = val;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string getString(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string requireString(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ValidationError("config: missing required key '" + key + "'");
        return it->second;
    }

    double getDouble(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : parseDouble(key, it->second);
    }

    double requireDouble(const std::string& key) const { return parseDouble(key, requireString(key)); }

    long getInt(const std::string& key, long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parseInt(key, it->second);
    }

    bool getBool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ValidationError("config: key '" + key + "' is not a boolean: " + v);
    }

    std::vector<double> getDoubleList(const std::string& key, const std::vector<double>& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        std::istringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (!tok.empty()) out.push_back(parseDouble(key, tok));
        }
        if (out.empty()) throw ValidationError("config: key '" + key + "' has an empty list");
        return out;
    }

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        if (b == std::string::npos) return {};
        return s.substr(b, e - b + 1);
    }
    static double parseDouble(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ValidationError("config: key '" + key + "' is not a number: " + v);
        }
    }
    static long parseInt(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            long d = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ValidationError("config: key '" + key + "' is not an integer: " + v);
        }
    }

    std::map<std::string, std::string> values_;
};

}  // namespace kdvlab

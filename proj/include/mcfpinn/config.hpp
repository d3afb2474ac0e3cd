#pragma once

// Flat `key = value` run configuration.
//
//   # comment
//   dim = 2
//   alpha = 1.5
//   epochs = 5000
//
// Overrides given as `key=value` strings are applied after the file and win over it.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "problem.hpp"
#include "training.hpp"

namespace mcfpinn {

struct RunConfig {
    ProblemSpec problem;
    TrainConfig train;
    std::string out_dir = "run";
    std::string run_name = "run";
    int grid_resolution = 101;
    std::vector<double> grid_slice;  // x3..xd of the dumped plane; zeros when empty

    void validate() const {
        problem.validate();
        train.validate();
        if (out_dir.empty()) throw ConfigError("out_dir must not be empty", "out_dir");
        if (grid_resolution < 2) throw ConfigError("grid_resolution must be >= 2", "grid_resolution");
        if (!grid_slice.empty() && static_cast<int>(grid_slice.size()) != problem.d - 2)
            throw ConfigError("grid_slice must list d - 2 coordinates", "grid_slice");
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view text, const std::string& key, int line) {
    T v{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError("invalid value '" + std::string(text) + "' for key '" + key + "'", key, line);
    return v;
}

inline bool parse_bool(std::string_view text, const std::string& key, int line) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("invalid boolean '" + std::string(text) + "' for key '" + key + "'", key, line);
}

inline std::vector<double> parse_list(std::string_view text, const std::string& key, int line) {
    std::vector<double> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        out.push_back(parse_number<double>(trim(text.substr(0, comma)), key, line));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace detail

/// Collects key/value assignments and turns them into a RunConfig.
class ConfigBuilder {
public:
    /// Keys that must be present before build().
    static const std::vector<std::string>& required_keys() {
        static const std::vector<std::string> keys{"dim", "alpha"};
        return keys;
    }

    void set(const std::string& key, std::string_view value, int line = 0) {
        const auto& table = setters();
        const auto it = table.find(key);
        if (it == table.end()) throw ConfigError("unknown config key '" + key + "'", key, line);
        it->second(cfg_, detail::trim(value), key, line);
        seen_.insert(key);
    }

    /// Parses one `key = value` line; blank lines and `#` comments are ignored.
    void parse_line(std::string_view raw, int line) {
        const auto hash = raw.find('#');
        std::string_view text = detail::trim(raw.substr(0, hash));
        if (text.empty()) return;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'", {}, line);
        const std::string key(detail::trim(text.substr(0, eq)));
        if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key", {}, line);
        try {
            set(key, text.substr(eq + 1), line);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line) + ": " + e.what(), e.key(), line);
        }
    }

    void parse_stream(std::istream& in) {
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) parse_line(raw, ++line);
    }

    void parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        parse_stream(in);
    }

    /// `key=value` override from the command line.
    void apply_override(std::string_view text) {
        const auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("override '" + std::string(text) + "' is not of the form key=value");
        set(std::string(detail::trim(text.substr(0, eq))), text.substr(eq + 1));
    }

    RunConfig build() const {
        for (const auto& key : required_keys())
            if (!seen_.count(key)) throw ConfigError("missing required config key '" + key + "'", key);
        RunConfig out = cfg_;
        try {
            out.validate();
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(std::string("invalid configuration: ") + e.what());
        }
        return out;
    }

private:
    using Setter = std::function<void(RunConfig&, std::string_view, const std::string&, int)>;

    static const std::map<std::string, Setter>& setters() {
        using detail::parse_bool;
        using detail::parse_number;
        static const std::map<std::string, Setter> table = {
            {"dim", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.problem.d = parse_number<int>(v, k, l); }},
            {"alpha", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.problem.alpha = parse_number<double>(v, k, l); }},
            {"r0", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.r0 = parse_number<double>(v, k, l); }},
            {"eps_clamp", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.eps_clamp = parse_number<double>(v, k, l); }},
            {"m_pairs", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.m_pairs = parse_number<int>(v, k, l); }},
            {"batch_residual", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.batch_residual = parse_number<int>(v, k, l); }},
            {"n_measure", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.n_measure = parse_number<int>(v, k, l); }},
            {"noise_delta", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.noise_delta = parse_number<double>(v, k, l); }},
            {"epochs", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.epochs = parse_number<std::int64_t>(v, k, l); }},
            {"lr_u", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.lr_u = parse_number<double>(v, k, l); }},
            {"lr_f", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.lr_f = parse_number<double>(v, k, l); }},
            {"lr_decay_factor", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.lr_decay_factor = parse_number<double>(v, k, l); }},
            {"lr_decay_every", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.lr_decay_every = parse_number<std::int64_t>(v, k, l); }},
            {"w_equ", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.weights.w_equ = parse_number<double>(v, k, l); }},
            {"w_g", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.weights.w_g = parse_number<double>(v, k, l); }},
            {"w_u", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.weights.w_u = parse_number<double>(v, k, l); }},
            {"hard_boundary", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.hard_boundary = parse_bool(v, k, l); }},
            {"seed", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.seed = parse_number<std::uint64_t>(v, k, l); }},
            {"eval_every", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.eval_every = parse_number<std::int64_t>(v, k, l); }},
            {"n_test", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.n_test = parse_number<int>(v, k, l); }},
            {"out_dir", [](RunConfig& c, std::string_view v, const std::string&, int) { c.out_dir = std::string(v); }},
            {"run_name", [](RunConfig& c, std::string_view v, const std::string&, int) { c.run_name = std::string(v); }},
            {"hidden_layers", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.hidden_layers = parse_number<int>(v, k, l); }},
            {"hidden_width", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.hidden_width = parse_number<int>(v, k, l); }},
            {"n_boundary", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.n_boundary = parse_number<int>(v, k, l); }},
            {"frozen_pairs", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.frozen_pairs = parse_bool(v, k, l); }},
            {"fixed_collocation", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.train.fixed_collocation = parse_bool(v, k, l); }},
            {"grid_resolution", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.grid_resolution = parse_number<int>(v, k, l); }},
            {"grid_slice", [](RunConfig& c, std::string_view v, const std::string& k, int l) { c.grid_slice = detail::parse_list(v, k, l); }},
        };
        return table;
    }

    RunConfig cfg_;
    std::set<std::string> seen_;
};

inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    ConfigBuilder b;
    b.parse_file(path);
    for (const auto& o : overrides) b.apply_override(o);
    return b.build();
}

}  // namespace mcfpinn

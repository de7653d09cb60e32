#pragma once

// JSON experiment configuration. Every key is optional and falls back to the
// defaults in ExperimentConfig; unknown keys are rejected so typos surface.
//
//   {
//     "k": 4, "n_max": 10000, "l_m": 100, "seed": 1,
//     "checkpoint_stride": 100, "top_k": 4,
//     "policies": ["round_robin", "ucb1", "chaos", "chaos_ci"],
//     "environments": {"source": "enumerated", "values": [...], "gap": 0.3},
//     "signal": {"kind": "uniform", "length": 0, "seed": 0},
//     "chaos": {"alpha": 0.99, "lambda_init": 0.02, "omega_init": 0.02,
//               "delta_l": 1, "delta_s": 2, "tau_init": 0},
//     "chaos_ci": {"gamma": 1.0, "beta": 1.5, "period": 100,
//                  "mag_min": 1e-4, "mag_max": 0.25, "pull_to_zero": false}
//   }

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "chaosmab/error.hpp"
#include "chaosmab/harness.hpp"

namespace chaosmab {

namespace detail {

using nlohmann::json;

inline void require_object(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed)
{
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw ConfigError("unknown key '" + std::string(where) + "." + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, std::string_view where, T& out)
{
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            if (!it->is_number_unsigned()) throw ConfigError("");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) throw ConfigError("");
        }
        out = it->template get<T>();
    } catch (const std::exception&) {
        throw ConfigError("bad value for '" + std::string(where) + "." + key + "': " + it->dump());
    }
}

inline std::vector<double> read_numbers(const json& j, std::string_view where)
{
    if (!j.is_array()) throw ConfigError(std::string(where) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError(std::string(where) + " must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::string_view to_string(EnvSourceKind k)
{
    switch (k) {
    case EnvSourceKind::enumerated: return "enumerated";
    case EnvSourceKind::sampled: return "sampled";
    case EnvSourceKind::explicit_list: return "explicit";
    }
    return "?";
}

inline std::string_view to_string(SignalKind k)
{
    switch (k) {
    case SignalKind::uniform: return "uniform";
    case SignalKind::logistic: return "logistic";
    case SignalKind::recorded: return "recorded";
    }
    return "?";
}

inline std::string_view to_string(TraceFormat f)
{
    return f == TraceFormat::int8_binary ? "int8-binary" : "float-text";
}

}  // namespace detail

inline std::optional<TraceFormat> parse_trace_format(std::string_view s)
{
    if (s == "int8-binary") return TraceFormat::int8_binary;
    if (s == "float-text") return TraceFormat::float_text;
    return std::nullopt;
}

/// Builds a validated configuration. Relative signal paths resolve against
/// `base_dir`.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
{
    using namespace detail;
    require_object(j, "config",
                   {"k", "n_max", "l_m", "seed", "checkpoint_stride", "top_k", "policies", "environments", "signal",
                    "chaos", "chaos_ci"});
    ExperimentConfig cfg;
    read(j, "k", "config", cfg.k);
    read(j, "n_max", "config", cfg.n_max);
    read(j, "l_m", "config", cfg.l_m);
    read(j, "seed", "config", cfg.master_seed);
    read(j, "checkpoint_stride", "config", cfg.checkpoint_stride);
    read(j, "top_k", "config", cfg.top_k);

    if (auto it = j.find("policies"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("config.policies must be an array of names");
        cfg.policies.clear();
        for (const auto& p : *it) {
            const auto kind = p.is_string() ? parse_policy(p.get<std::string>()) : std::nullopt;
            if (!kind) throw ConfigError("unknown policy " + p.dump());
            cfg.policies.push_back(*kind);
        }
    }

    if (auto it = j.find("environments"); it != j.end()) {
        const json& e = *it;
        require_object(e, "environments", {"source", "values", "gap", "count", "seed", "list"});
        std::string source = "enumerated";
        read(e, "source", "environments", source);
        if (source == "enumerated") cfg.envs.source = EnvSourceKind::enumerated;
        else if (source == "sampled") cfg.envs.source = EnvSourceKind::sampled;
        else if (source == "explicit") cfg.envs.source = EnvSourceKind::explicit_list;
        else throw ConfigError("environments.source must be enumerated, sampled or explicit");
        if (auto v = e.find("values"); v != e.end()) cfg.envs.values = read_numbers(*v, "environments.values");
        read(e, "gap", "environments", cfg.envs.gap);
        read(e, "count", "environments", cfg.envs.count);
        read(e, "seed", "environments", cfg.envs.seed);
        if (auto l = e.find("list"); l != e.end()) {
            if (!l->is_array()) throw ConfigError("environments.list must be an array of arrays");
            for (const auto& row : *l) cfg.envs.list.push_back(read_numbers(row, "environments.list[]"));
        }
        if (cfg.envs.source == EnvSourceKind::explicit_list && cfg.envs.list.empty())
            throw ConfigError("environments.list is required for explicit environments");
    }

    if (auto it = j.find("signal"); it != j.end()) {
        const json& s = *it;
        require_object(s, "signal", {"kind", "length", "seed", "path", "format", "x0", "allow_wrap"});
        std::string kind = "uniform";
        read(s, "kind", "signal", kind);
        if (kind == "uniform") cfg.signal.kind = SignalKind::uniform;
        else if (kind == "logistic") cfg.signal.kind = SignalKind::logistic;
        else if (kind == "recorded") cfg.signal.kind = SignalKind::recorded;
        else throw ConfigError("signal.kind must be uniform, logistic or recorded");
        read(s, "length", "signal", cfg.signal.length);
        read(s, "seed", "signal", cfg.signal.seed);
        read(s, "path", "signal", cfg.signal.path);
        std::string format = "float-text";
        read(s, "format", "signal", format);
        const auto f = parse_trace_format(format);
        if (!f) throw ConfigError("signal.format must be int8-binary or float-text");
        cfg.signal.format = *f;
        if (s.contains("x0")) {
            double x0 = 0.0;
            read(s, "x0", "signal", x0);
            if (!(x0 >= 0.0 && x0 <= 1.0)) throw ConfigError("signal.x0 must lie in [0, 1]");
            cfg.signal.x0 = x0;
        }
        read(s, "allow_wrap", "signal", cfg.signal.allow_wrap);
        if (!cfg.signal.path.empty() && std::filesystem::path(cfg.signal.path).is_relative() && !base_dir.empty())
            cfg.signal.path = (base_dir / cfg.signal.path).string();
    }

    if (auto it = j.find("chaos"); it != j.end()) {
        const json& c = *it;
        require_object(c, "chaos", {"alpha", "lambda_init", "omega_init", "delta_l", "delta_s", "tau_init"});
        read(c, "alpha", "chaos", cfg.chaos.alpha);
        read(c, "lambda_init", "chaos", cfg.chaos.lambda_init);
        read(c, "omega_init", "chaos", cfg.chaos.omega_init);
        read(c, "delta_l", "chaos", cfg.chaos.delta_l);
        read(c, "tau_init", "chaos", cfg.chaos.tau_init);
        if (c.contains("delta_s")) {
            std::uint64_t ds = 0;
            read(c, "delta_s", "chaos", ds);
            cfg.chaos.delta_s = ds;
        }
    }

    if (auto it = j.find("chaos_ci"); it != j.end()) {
        const json& c = *it;
        require_object(c, "chaos_ci", {"gamma", "beta", "period", "mag_min", "mag_max", "pull_to_zero"});
        read(c, "gamma", "chaos_ci", cfg.ci.gamma);
        read(c, "beta", "chaos_ci", cfg.ci.beta);
        read(c, "period", "chaos_ci", cfg.ci.period);
        read(c, "mag_min", "chaos_ci", cfg.ci.mag_min);
        read(c, "mag_max", "chaos_ci", cfg.ci.mag_max);
        read(c, "pull_to_zero", "chaos_ci", cfg.ci.pull_to_zero);
    }

    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j, path.parent_path());
}

/// Fully resolved configuration, defaults included. parse_config(to_json(c))
/// reproduces c.
inline nlohmann::json to_json(const ExperimentConfig& cfg)
{
    using nlohmann::json;
    json policies = json::array();
    for (PolicyKind p : cfg.policies) policies.push_back(std::string(to_string(p)));

    json envs = {{"source", std::string(detail::to_string(cfg.envs.source))}, {"values", cfg.envs.values}};
    switch (cfg.envs.source) {
    case EnvSourceKind::enumerated: envs["gap"] = cfg.envs.gap; break;
    case EnvSourceKind::sampled:
        envs["count"] = cfg.envs.count;
        envs["seed"] = cfg.envs.seed;
        break;
    case EnvSourceKind::explicit_list: envs["list"] = cfg.envs.list; break;
    }

    json signal = {{"kind", std::string(detail::to_string(cfg.signal.kind))},
                   {"allow_wrap", cfg.signal.allow_wrap}};
    if (cfg.signal.kind == SignalKind::recorded) {
        signal["path"] = cfg.signal.path;
        signal["format"] = std::string(detail::to_string(cfg.signal.format));
    } else {
        signal["length"] = cfg.signal.length;
        signal["seed"] = cfg.signal.seed;
        if (cfg.signal.x0) signal["x0"] = *cfg.signal.x0;
    }

    return {
        {"k", cfg.k},
        {"n_max", cfg.n_max},
        {"l_m", cfg.l_m},
        {"seed", cfg.master_seed},
        {"checkpoint_stride", cfg.checkpoint_stride},
        {"top_k", cfg.effective_top_k()},
        {"policies", policies},
        {"environments", envs},
        {"signal", signal},
        {"chaos",
         {{"alpha", cfg.chaos.alpha},
          {"lambda_init", cfg.chaos.lambda_init},
          {"omega_init", cfg.chaos.omega_init},
          {"delta_l", cfg.chaos.delta_l},
          {"delta_s", cfg.delta_s()},
          {"tau_init", cfg.chaos.tau_init}}},
        {"chaos_ci",
         {{"gamma", cfg.ci.gamma},
          {"beta", cfg.ci.beta},
          {"period", cfg.ci.period},
          {"mag_min", cfg.ci.mag_min},
          {"mag_max", cfg.ci.mag_max},
          {"pull_to_zero", cfg.ci.pull_to_zero}}},
    };
}

}  // namespace chaosmab

#pragma once

// Experiment orchestration: l_m independent measurements per (environment,
// policy), folded into ensemble means, per-environment scatter points and
// cross-environment variances.
//
// Every measurement owns its random stream, seeded from
// (master seed, environment index, policy name, measurement id), and reads
// the shared signal from its own offset. Work is split into
// (environment, policy) units whose measurements are folded in id order, so
// results are bit-identical for any number of worker threads.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaosmab/csv.hpp"
#include "chaosmab/env.hpp"
#include "chaosmab/error.hpp"
#include "chaosmab/metrics.hpp"
#include "chaosmab/parallel.hpp"
#include "chaosmab/policy.hpp"
#include "chaosmab/signal.hpp"

namespace chaosmab {

enum class EnvSourceKind { enumerated, sampled, explicit_list };

struct EnvSpec {
    EnvSourceKind source = EnvSourceKind::enumerated;
    std::vector<double> values = default_value_grid();
    double gap = 0.3;                         // enumerated
    std::size_t count = 100;                  // sampled
    std::uint64_t seed = 0;                   // sampled
    std::vector<std::vector<double>> list;    // explicit_list
};

enum class SignalKind { uniform, logistic, recorded };

struct SignalSpec {
    SignalKind kind = SignalKind::uniform;
    std::size_t length = 0;  // synthetic; 0 picks enough for the whole ensemble (capped)
    std::uint64_t seed = 0;
    std::string path;        // recorded
    TraceFormat format = TraceFormat::float_text;
    std::optional<double> x0;
    bool allow_wrap = true;
};

inline constexpr std::size_t kMaxAutoSignalLength = std::size_t{1} << 24;

struct ExperimentConfig {
    std::size_t k = 4;
    std::uint64_t n_max = 10000;
    std::uint64_t l_m = 100;
    std::vector<PolicyKind> policies{kAllPolicies.begin(), kAllPolicies.end()};
    ChaosParams chaos;
    CiParams ci;
    std::uint64_t master_seed = 1;
    std::uint64_t checkpoint_stride = 100;
    std::size_t top_k = 0;  // 0 means min(4, K)
    EnvSpec envs;
    SignalSpec signal;

    unsigned depth() const noexcept { return log2_exact(k); }
    std::uint64_t delta_s() const noexcept { return chaos.delta_s.value_or(depth()); }
    std::size_t effective_top_k() const noexcept { return top_k == 0 ? default_top_k(k) : top_k; }

    bool needs_signal() const
    {
        for (PolicyKind p : policies) {
            if (uses_signal(p)) return true;
        }
        return false;
    }

    /// Signal samples one measurement spans, first to last index inclusive.
    std::uint64_t samples_per_measurement() const noexcept
    {
        return (n_max - 1) * delta_s() + (depth() - 1) * chaos.delta_l + 1;
    }

    void validate() const
    {
        if (k < 2 || !is_power_of_two(k)) throw ConfigError("k must be a power of two >= 2");
        if (depth() > kMaxDepth) throw ConfigError("k too large");
        if (n_max < 1) throw ConfigError("n_max must be at least 1");
        if (l_m < 1) throw ConfigError("l_m must be at least 1");
        if (policies.empty()) throw ConfigError("no policies selected");
        if (checkpoint_stride < 1) throw ConfigError("checkpoint_stride must be at least 1");
        if (top_k > k) throw ConfigError("top_k exceeds k");
        if (!(chaos.alpha > 0.0 && chaos.alpha < 1.0)) throw ConfigError("chaos.alpha must lie in (0, 1)");
        if (!(chaos.lambda_init >= 0.0) || !(chaos.omega_init >= 0.0))
            throw ConfigError("chaos.lambda_init and chaos.omega_init must be non-negative");
        if (chaos.delta_l < 1) throw ConfigError("chaos.delta_l must be at least 1");
        if (chaos.delta_s && *chaos.delta_s < 1) throw ConfigError("chaos.delta_s must be at least 1");
        if (!(ci.gamma >= 0.0)) throw ConfigError("chaos_ci.gamma must be non-negative");
        if (!(ci.beta > 1.0)) throw ConfigError("chaos_ci.beta must exceed 1");
        if (ci.period < 1) throw ConfigError("chaos_ci.period must be at least 1");
        if (!(ci.mag_min > 0.0 && ci.mag_min <= ci.mag_max)) throw ConfigError("need 0 < chaos_ci.mag_min <= chaos_ci.mag_max");
        if (signal.kind == SignalKind::recorded && signal.path.empty() && needs_signal())
            throw ConfigError("signal.path is required for a recorded signal");
    }
};

inline std::vector<RewardEnvironment> build_environments(const ExperimentConfig& cfg)
{
    std::vector<RewardEnvironment> envs;
    try {
        switch (cfg.envs.source) {
        case EnvSourceKind::enumerated: envs = enumerate_envs(cfg.k, cfg.envs.values, cfg.envs.gap); break;
        case EnvSourceKind::sampled: envs = sample_envs(cfg.k, cfg.envs.count, cfg.envs.values, cfg.envs.seed); break;
        case EnvSourceKind::explicit_list:
            for (const auto& mus : cfg.envs.list) {
                if (mus.size() != cfg.k) throw ConfigError("explicit environment has " + std::to_string(mus.size()) +
                                                           " means, expected k = " + std::to_string(cfg.k));
                envs.emplace_back(mus);
                if (!envs.back().is_open_unit()) throw ConfigError("explicit reward means must lie in (0, 1)");
            }
            break;
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("environments: ") + e.what());
    }
    if (envs.empty()) throw ConfigError("environment list is empty");
    return envs;
}

/// The signal for the configured experiment, or nothing if no selected
/// policy reads one.
inline std::optional<SignalSource> build_signal(const ExperimentConfig& cfg)
{
    if (!cfg.needs_signal()) return std::nullopt;
    const SignalSpec& s = cfg.signal;
    if (s.kind == SignalKind::recorded) {
        if (!s.path.empty()) {
            try {
                return load_recorded(s.path, s.format);
            } catch (const IoError& e) {
                throw ConfigError(std::string("signal: ") + e.what());
            }
        }
        throw ConfigError("signal.path is required for a recorded signal");
    }
    std::size_t length = s.length;
    if (length == 0) {
        const double want = static_cast<double>(cfg.l_m) * static_cast<double>(cfg.n_max) *
                            static_cast<double>(cfg.delta_s());
        length = want >= static_cast<double>(kMaxAutoSignalLength) ? kMaxAutoSignalLength
                                                                   : static_cast<std::size_t>(want) + cfg.k;
    }
    return gen_synthetic(s.kind == SignalKind::uniform ? SyntheticKind::uniform_iid : SyntheticKind::logistic_map,
                         length, s.seed, s.x0);
}

inline std::uint64_t measurement_seed(std::uint64_t master, std::size_t env_index, PolicyKind policy,
                                      std::uint64_t measurement_id) noexcept
{
    return derive_seed(master, env_index, hash_name(to_string(policy)), measurement_id);
}

/// First signal index of a measurement: consecutive measurements read
/// consecutive, non-overlapping stretches of the trace (mod its length).
inline std::uint64_t signal_offset(const ExperimentConfig& cfg, const SignalSource& signal,
                                   std::uint64_t measurement_id)
{
    const auto len = static_cast<unsigned __int128>(signal.length());
    const auto raw = static_cast<unsigned __int128>(measurement_id) * cfg.n_max * cfg.delta_s();
    return static_cast<std::uint64_t>(raw % len);
}

/// One trajectory of n_max steps, checkpointed.
inline MetricsSeries run_measurement(const ExperimentConfig& cfg, const RewardEnvironment& env,
                                     std::size_t env_index, PolicyKind policy, std::uint64_t measurement_id,
                                     const SignalSource* signal)
{
    if (env.arms() != cfg.k) throw ConfigError("environment arm count differs from k");
    std::uint64_t offset = 0;
    if (uses_signal(policy)) {
        if (signal == nullptr) throw ConfigError(std::string(to_string(policy)) + " needs a signal");
        offset = signal_offset(cfg, *signal, measurement_id);
        const auto last = static_cast<unsigned __int128>(measurement_id) * cfg.n_max * cfg.delta_s() +
                          cfg.chaos.tau_init + cfg.samples_per_measurement();
        if (!cfg.signal.allow_wrap && last > signal->length())
            throw ConfigError("signal too short for measurement " + std::to_string(measurement_id) +
                              " and wrap-around is disabled");
    }

    Rng rng(measurement_seed(cfg.master_seed, env_index, policy, measurement_id));
    AnyPolicy state = make_policy(policy, cfg.depth(), signal, cfg.chaos, cfg.ci, offset);
    ArmStats stats(cfg.k);
    const auto checkpoints = make_checkpoints(cfg.n_max, cfg.checkpoint_stride);
    const std::size_t top_k = cfg.effective_top_k();

    MetricsSeries series;
    series.checkpoints.reserve(checkpoints.size());
    double cum_reward = 0.0;
    std::size_t next = 0;
    for (std::uint64_t n = 1; n <= cfg.n_max; ++n) {
        cum_reward += step(state, env, rng, stats).reward;
        if (n == checkpoints[next]) {
            series.capture(stats, env, cum_reward, top_k);
            ++next;
        }
    }
    return series;
}

/// Ensemble means for one (environment, policy) pair.
struct PolicyCurve {
    std::size_t env_index = 0;
    PolicyKind policy = PolicyKind::round_robin;
    std::vector<double> mean_reward;
    std::vector<double> mean_regret;
    std::vector<double> mean_cor;
    std::vector<std::vector<double>> mean_pulls;  // [checkpoint][arm]

    double final_reward() const { return mean_reward.back(); }
    double final_cor() const { return mean_cor.back(); }

    friend bool operator==(const PolicyCurve&, const PolicyCurve&) = default;
};

struct ScatterPoint {
    std::size_t env_index;
    PolicyKind policy;
    double reward_norm;
    double cor;
};

/// Cross-environment statistics of the final-step metrics for one policy.
struct PolicySummary {
    PolicyKind policy;
    double mean_cor = 0.0;
    double mean_reward_norm = 0.0;
    std::optional<double> var_cor;          // needs >= 2 environments
    std::optional<double> var_reward_norm;
    std::vector<double> mean_cor_at;        // averaged over environments, per checkpoint
    std::vector<double> mean_reward_norm_at;
};

struct EnsembleResult {
    std::size_t arms = 0;
    std::uint64_t l_m = 0;
    std::vector<std::uint64_t> checkpoints;
    std::vector<RewardEnvironment> envs;
    std::vector<PolicyKind> policies;
    std::vector<PolicyCurve> curves;  // environment-major: env * policies.size() + policy
    std::vector<ScatterPoint> scatter;
    std::vector<PolicySummary> summary;

    const PolicyCurve& curve(std::size_t env_index, std::size_t policy_index) const
    {
        return curves.at(env_index * policies.size() + policy_index);
    }

    const PolicySummary& summary_for(PolicyKind policy) const
    {
        for (const auto& s : summary) {
            if (s.policy == policy) return s;
        }
        throw std::out_of_range("policy not part of this ensemble");
    }

    std::size_t policy_index(PolicyKind policy) const
    {
        for (std::size_t i = 0; i < policies.size(); ++i) {
            if (policies[i] == policy) return i;
        }
        throw std::out_of_range("policy not part of this ensemble");
    }
};

/// Sample variance (divisor count - 1).
inline double sample_variance(const std::vector<double>& xs)
{
    if (xs.size() < 2) throw std::invalid_argument("sample variance needs at least two values");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size() - 1);
}

inline PolicyCurve run_unit(const ExperimentConfig& cfg, const RewardEnvironment& env, std::size_t env_index,
                            PolicyKind policy, const SignalSource* signal)
{
    PolicyCurve curve;
    curve.env_index = env_index;
    curve.policy = policy;
    for (std::uint64_t id = 0; id < cfg.l_m; ++id) {
        const MetricsSeries s = run_measurement(cfg, env, env_index, policy, id, signal);
        if (id == 0) {
            curve.mean_reward.assign(s.size(), 0.0);
            curve.mean_regret.assign(s.size(), 0.0);
            curve.mean_cor.assign(s.size(), 0.0);
            curve.mean_pulls.assign(s.size(), std::vector<double>(cfg.k, 0.0));
        }
        for (std::size_t c = 0; c < s.size(); ++c) {
            curve.mean_reward[c] += s.reward_at[c];
            curve.mean_regret[c] += s.regret_at[c];
            curve.mean_cor[c] += s.cor_at[c];
            for (std::size_t i = 0; i < cfg.k; ++i) curve.mean_pulls[c][i] += static_cast<double>(s.pulls_at[c][i]);
        }
    }
    const double count = static_cast<double>(cfg.l_m);
    for (std::size_t c = 0; c < curve.mean_reward.size(); ++c) {
        curve.mean_reward[c] /= count;
        curve.mean_regret[c] /= count;
        curve.mean_cor[c] /= count;
        for (double& t : curve.mean_pulls[c]) t /= count;
    }
    return curve;
}

/// Runs every (environment, policy, measurement) and aggregates.
inline EnsembleResult run_ensemble(const ExperimentConfig& cfg, const std::vector<RewardEnvironment>& envs,
                                   const SignalSource* signal, unsigned jobs = 1)
{
    cfg.validate();
    if (envs.empty()) throw ConfigError("environment list is empty");
    if (cfg.needs_signal() && signal == nullptr) throw ConfigError("selected policies need a signal");

    EnsembleResult result;
    result.arms = cfg.k;
    result.l_m = cfg.l_m;
    result.checkpoints = make_checkpoints(cfg.n_max, cfg.checkpoint_stride);
    result.envs = envs;
    result.policies = cfg.policies;

    const std::size_t np = cfg.policies.size();
    result.curves.resize(envs.size() * np);
    parallel_for(result.curves.size(), jobs, [&](std::size_t u) {
        const std::size_t e = u / np;
        result.curves[u] = run_unit(cfg, envs[e], e, cfg.policies[u % np], signal);
    });

    const std::uint64_t n_max = result.checkpoints.back();
    for (std::size_t e = 0; e < envs.size(); ++e) {
        for (std::size_t p = 0; p < np; ++p) {
            const PolicyCurve& c = result.curve(e, p);
            result.scatter.push_back(
                {e, c.policy, normalized_reward(c.final_reward(), envs[e], n_max), c.final_cor()});
        }
    }

    for (std::size_t p = 0; p < np; ++p) {
        PolicySummary s;
        s.policy = cfg.policies[p];
        s.mean_cor_at.assign(result.checkpoints.size(), 0.0);
        s.mean_reward_norm_at.assign(result.checkpoints.size(), 0.0);
        std::vector<double> cors, rewards;
        for (std::size_t e = 0; e < envs.size(); ++e) {
            const PolicyCurve& c = result.curve(e, p);
            cors.push_back(c.final_cor());
            rewards.push_back(normalized_reward(c.final_reward(), envs[e], n_max));
            for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
                s.mean_cor_at[i] += c.mean_cor[i];
                s.mean_reward_norm_at[i] += normalized_reward(c.mean_reward[i], envs[e], result.checkpoints[i]);
            }
        }
        const double count = static_cast<double>(envs.size());
        for (double& v : s.mean_cor_at) v /= count;
        for (double& v : s.mean_reward_norm_at) v /= count;
        for (double v : cors) s.mean_cor += v;
        for (double v : rewards) s.mean_reward_norm += v;
        s.mean_cor /= count;
        s.mean_reward_norm /= count;
        if (envs.size() >= 2) {
            s.var_cor = sample_variance(cors);
            s.var_reward_norm = sample_variance(rewards);
        }
        result.summary.push_back(std::move(s));
    }
    return result;
}

struct VarianceRow {
    PolicyKind policy;
    double var_cor;
    double var_reward_norm;
};

/// Per policy, sample variance over environments of COR(n_max) and
/// reward_norm(n_max).
inline std::vector<VarianceRow> variance_table(const EnsembleResult& result)
{
    if (result.envs.size() < 2) throw std::invalid_argument("variance table needs at least two environments");
    std::vector<VarianceRow> rows;
    for (const auto& s : result.summary) rows.push_back({s.policy, *s.var_cor, *s.var_reward_norm});
    return rows;
}

// ---------------------------------------------------------------------------
// CSV outputs

inline void write_curves_csv(std::ostream& out, const EnsembleResult& r)
{
    CsvRow header;
    header << "env_id" << "policy" << "step" << "mean_reward" << "mean_regret" << "mean_cor";
    for (std::size_t i = 0; i < r.arms; ++i) header << ("mean_t_" + std::to_string(i));
    out << header;
    for (const auto& c : r.curves) {
        for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
            CsvRow row;
            row << c.env_index << to_string(c.policy) << r.checkpoints[i] << c.mean_reward[i] << c.mean_regret[i]
                << c.mean_cor[i];
            for (double t : c.mean_pulls[i]) row << t;
            out << row;
        }
    }
}

inline void write_scatter_csv(std::ostream& out, const EnsembleResult& r)
{
    out << (CsvRow() << "env_id" << "policy" << "reward_norm" << "cor");
    for (const auto& p : r.scatter) out << (CsvRow() << p.env_index << to_string(p.policy) << p.reward_norm << p.cor);
}

/// Header only when fewer than two environments were run.
inline void write_variance_csv(std::ostream& out, const EnsembleResult& r)
{
    out << (CsvRow() << "policy" << "var_cor" << "var_reward_norm");
    if (r.envs.size() < 2) return;
    for (const auto& v : variance_table(r)) out << (CsvRow() << to_string(v.policy) << v.var_cor << v.var_reward_norm);
}

/// Environment-averaged COR(n) and reward_norm(n) per policy.
inline void write_ensemble_csv(std::ostream& out, const EnsembleResult& r)
{
    out << (CsvRow() << "policy" << "step" << "mean_cor" << "mean_reward_norm");
    for (const auto& s : r.summary) {
        for (std::size_t i = 0; i < r.checkpoints.size(); ++i)
            out << (CsvRow() << to_string(s.policy) << r.checkpoints[i] << s.mean_cor_at[i] << s.mean_reward_norm_at[i]);
    }
}

}  // namespace chaosmab

#pragma once

// Evaluation quantities: realized reward, expected regret, correct order rate
// (COR) and normalized reward, plus the checkpointed series one measurement
// produces.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "chaosmab/env.hpp"
#include "chaosmab/policy.hpp"

namespace chaosmab {

/// sum over i != i* of (mu* - mu_i) * T_i.
inline double regret_of(const RewardEnvironment& env, const std::vector<std::uint64_t>& pulls)
{
    if (pulls.size() != env.arms()) throw std::invalid_argument("pull vector length differs from arm count");
    const double best = env.best_mean();
    double regret = 0.0;
    for (std::size_t i = 0; i < pulls.size(); ++i) {
        if (i == env.best_arm()) continue;
        regret += (best - env.mus()[i]) * static_cast<double>(pulls[i]);
    }
    return regret;
}

/// Arms sorted by estimated mean, best first; ties keep the lower index first.
inline std::vector<std::size_t> estimated_order(const std::vector<double>& estimates)
{
    std::vector<std::size_t> order(estimates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return estimates[a] > estimates[b]; });
    return order;
}

inline std::size_t default_top_k(std::size_t arms) noexcept { return std::min<std::size_t>(4, arms); }

/// 1 iff the k-th best arm by estimate equals the true k-th best arm for every
/// k <= top_k.
inline int cor_of(const std::vector<double>& estimates, const RewardEnvironment& env, std::size_t top_k)
{
    if (estimates.size() != env.arms()) throw std::invalid_argument("estimate vector length differs from arm count");
    top_k = std::min(top_k, env.arms());
    const auto order = estimated_order(estimates);
    for (std::size_t k = 0; k < top_k; ++k) {
        if (order[k] != env.ranked(k)) return 0;
    }
    return 1;
}

inline int cor_of(const ArmStats& stats, const RewardEnvironment& env, std::size_t top_k)
{
    std::vector<double> estimates(stats.arms());
    for (std::size_t i = 0; i < stats.arms(); ++i) estimates[i] = stats.mean(i);
    return cor_of(estimates, env, top_k);
}

/// reward(n) / (mu* n).
inline double normalized_reward(double cum_reward, const RewardEnvironment& env, std::uint64_t n)
{
    if (n == 0) throw std::invalid_argument("normalized reward needs n >= 1");
    return cum_reward / (env.best_mean() * static_cast<double>(n));
}

/// Steps 1, stride, 2 stride, ..., and n_max, ascending and without repeats.
inline std::vector<std::uint64_t> make_checkpoints(std::uint64_t n_max, std::uint64_t stride)
{
    if (n_max == 0) throw std::invalid_argument("n_max must be at least 1");
    if (stride == 0) throw std::invalid_argument("checkpoint stride must be at least 1");
    std::vector<std::uint64_t> out{1};
    for (std::uint64_t n = stride; n <= n_max; n += stride) {
        if (n != out.back()) out.push_back(n);
    }
    if (out.back() != n_max) out.push_back(n_max);
    return out;
}

/// Trajectory of one measurement sampled at the checkpoints.
struct MetricsSeries {
    std::vector<std::uint64_t> checkpoints;
    std::vector<double> reward_at;
    std::vector<double> regret_at;
    std::vector<int> cor_at;
    std::vector<std::vector<std::uint64_t>> pulls_at;

    std::size_t size() const noexcept { return checkpoints.size(); }

    /// Appends the state after `stats.step` plays.
    void capture(const ArmStats& stats, const RewardEnvironment& env, double cum_reward, std::size_t top_k)
    {
        checkpoints.push_back(stats.step);
        reward_at.push_back(cum_reward);
        regret_at.push_back(regret_of(env, stats.pulls));
        cor_at.push_back(cor_of(stats, env, top_k));
        pulls_at.push_back(stats.pulls);
    }

    friend bool operator==(const MetricsSeries&, const MetricsSeries&) = default;
};

}  // namespace chaosmab

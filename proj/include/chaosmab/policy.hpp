#pragma once

// Arm-selection policies: RoundRobin, UCB1, and the signal-threshold
// policies Chaos and Chaos-CI.
//
// The threshold policies turn M signal samples into an M-bit arm index. Level
// m compares one sample against TH[m, S_1..S_{m-1}], so the thresholds form a
// complete binary tree with 2^M - 1 nodes, stored here in heap order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "chaosmab/env.hpp"
#include "chaosmab/rng.hpp"
#include "chaosmab/signal.hpp"

namespace chaosmab {

inline constexpr unsigned kMaxDepth = 20;

// ---------------------------------------------------------------------------
// Per-arm bookkeeping

/// Cumulative pulls T_i(n) and rewards R_i(n) after `step` plays.
struct ArmStats {
    std::vector<std::uint64_t> pulls;
    std::vector<std::uint64_t> rewards;
    std::uint64_t step = 0;

    explicit ArmStats(std::size_t arms) : pulls(arms, 0), rewards(arms, 0) {}

    std::size_t arms() const noexcept { return pulls.size(); }

    void record(std::size_t arm, int reward)
    {
        ++pulls[arm];
        rewards[arm] += static_cast<std::uint64_t>(reward);
        ++step;
    }

    /// Sample mean; an arm that was never pulled estimates 0.
    double mean(std::size_t arm) const noexcept
    {
        return pulls[arm] == 0 ? 0.0 : static_cast<double>(rewards[arm]) / static_cast<double>(pulls[arm]);
    }
};

struct StepOutcome {
    std::size_t arm;
    int reward;
};

// ---------------------------------------------------------------------------
// Baselines

/// Cycles through the arms: step n (1-based) plays arm (n - 1) mod K.
inline std::size_t rr_select(std::uint64_t n, std::size_t arms)
{
    return static_cast<std::size_t>((n - 1) % arms);
}

/// UCB1 index policy. Unplayed arms go first, lowest index first; afterwards
/// argmax of mean + sqrt(2 ln n / T_i) with ties to the lowest index.
inline std::size_t ucb1_select(const ArmStats& stats, std::uint64_t n)
{
    for (std::size_t i = 0; i < stats.arms(); ++i) {
        if (stats.pulls[i] == 0) return i;
    }
    const double log_n = std::log(static_cast<double>(n));
    std::size_t best = 0;
    double best_index = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < stats.arms(); ++i) {
        const double t = static_cast<double>(stats.pulls[i]);
        const double index = static_cast<double>(stats.rewards[i]) / t + std::sqrt(2.0 * log_n / t);
        if (index > best_index) {
            best_index = index;
            best = i;
        }
    }
    return best;
}

class RoundRobinPolicy {
public:
    static constexpr std::string_view name = "round_robin";

    StepOutcome step(const RewardEnvironment& env, Rng& rng, ArmStats& stats)
    {
        const std::size_t arm = rr_select(stats.step + 1, env.arms());
        const int reward = draw_reward(env, arm, rng);
        stats.record(arm, reward);
        return {arm, reward};
    }
};

class Ucb1Policy {
public:
    static constexpr std::string_view name = "ucb1";

    StepOutcome step(const RewardEnvironment& env, Rng& rng, ArmStats& stats)
    {
        const std::size_t arm = ucb1_select(stats, stats.step + 1);
        const int reward = draw_reward(env, arm, rng);
        stats.record(arm, reward);
        return {arm, reward};
    }
};

// ---------------------------------------------------------------------------
// Threshold tree

class ThresholdTree {
public:
    ThresholdTree(unsigned depth, double lambda_init, double omega_init)
        : depth_(depth)
    {
        if (depth < 1 || depth > kMaxDepth) throw std::invalid_argument("tree depth out of range");
        const std::size_t n = (std::size_t{1} << depth) - 1;
        thresholds_.assign(n, 0.0);
        lambdas_.assign(n, lambda_init);
        omegas_.assign(n, omega_init);
    }

    /// Heap position of TH[level, prefix]; level is 1-based and prefix holds
    /// level - 1 bits.
    static std::size_t node(unsigned level, std::uint64_t prefix) noexcept
    {
        return (std::size_t{1} << (level - 1)) - 1 + static_cast<std::size_t>(prefix);
    }

    unsigned depth() const noexcept { return depth_; }
    std::size_t size() const noexcept { return thresholds_.size(); }

    double threshold(unsigned level, std::uint64_t prefix) const { return thresholds_.at(node(level, prefix)); }
    double lambda(unsigned level, std::uint64_t prefix) const { return lambdas_.at(node(level, prefix)); }
    double omega(unsigned level, std::uint64_t prefix) const { return omegas_.at(node(level, prefix)); }

    double& threshold(unsigned level, std::uint64_t prefix) { return thresholds_.at(node(level, prefix)); }
    double& lambda(unsigned level, std::uint64_t prefix) { return lambdas_.at(node(level, prefix)); }
    double& omega(unsigned level, std::uint64_t prefix) { return omegas_.at(node(level, prefix)); }

    const std::vector<double>& thresholds() const noexcept { return thresholds_; }
    const std::vector<double>& lambdas() const noexcept { return lambdas_; }
    const std::vector<double>& omegas() const noexcept { return omegas_; }

    friend bool operator==(const ThresholdTree&, const ThresholdTree&) = default;

private:
    unsigned depth_;
    std::vector<double> thresholds_;
    std::vector<double> lambdas_;
    std::vector<double> omegas_;
};

/// Bits S_1..S_M of one decision, the arm they encode, and the signal
/// indices that were compared.
struct Decision {
    unsigned depth = 0;
    std::size_t arm = 0;
    std::array<std::uint64_t, kMaxDepth> signal_indices{};

    /// S_level, level in 1..depth.
    int bit(unsigned level) const noexcept { return static_cast<int>((arm >> (depth - level)) & 1U); }

    /// S_1..S_{level-1} as an integer.
    std::uint64_t prefix(unsigned level) const noexcept { return arm >> (depth - level + 1); }
};

/// Compares samples tau_s, tau_s + delta_l, ... against the thresholds along
/// the path the bits select. S_m = 1 iff sample >= threshold.
inline Decision chaos_select(const ThresholdTree& tree, const SignalSource& source, std::uint64_t tau_s,
                             std::uint64_t delta_l)
{
    Decision d;
    d.depth = tree.depth();
    std::uint64_t prefix = 0;
    std::uint64_t tau = tau_s;
    for (unsigned m = 1; m <= d.depth; ++m) {
        if (m > 1) tau += delta_l;
        d.signal_indices[m - 1] = tau;
        const int bit = source.at(tau) >= tree.threshold(m, prefix) ? 1 : 0;
        prefix = (prefix << 1) | static_cast<std::uint64_t>(bit);
    }
    d.arm = static_cast<std::size_t>(prefix);
    return d;
}

/// Threshold update on the decision path.
///
/// Reward: TH <- alpha TH + Lambda (-1)^S  (makes the same bit likelier).
/// No reward: TH <- alpha TH + Omega (-1)^(1-S)  (makes it less likely).
/// Results are clamped to the signal range.
inline void chaos_update(ThresholdTree& tree, const Decision& decision, int reward, double alpha)
{
    for (unsigned m = 1; m <= decision.depth; ++m) {
        const std::uint64_t prefix = decision.prefix(m);
        const int bit = decision.bit(m);
        double& th = tree.threshold(m, prefix);
        double step;
        if (reward > 0) {
            step = bit == 0 ? tree.lambda(m, prefix) : -tree.lambda(m, prefix);
        } else {
            step = bit == 1 ? tree.omega(m, prefix) : -tree.omega(m, prefix);
        }
        th = std::clamp(alpha * th + step, kSignalMin, kSignalMax);
    }
}

// ---------------------------------------------------------------------------
// Confidence intervals over arm subsets

/// Contiguous block of arm indices [first, first + count).
struct ArmSet {
    std::size_t first = 0;
    std::size_t count = 0;

    bool contains(std::size_t arm) const noexcept { return arm >= first && arm < first + count; }

    std::vector<std::size_t> members() const
    {
        std::vector<std::size_t> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = first + i;
        return out;
    }

    friend bool operator==(const ArmSet&, const ArmSet&) = default;
};

/// Arms reachable from TH[level, prefix] when its bit resolves to 0 and to 1:
/// the arms whose binary code starts with prefix.0 and prefix.1.
inline std::pair<ArmSet, ArmSet> arm_sets(unsigned depth, unsigned level, std::uint64_t prefix)
{
    if (level < 1 || level > depth) throw std::invalid_argument("level out of range");
    if (prefix >> (level - 1) != 0) throw std::invalid_argument("prefix longer than level - 1 bits");
    const unsigned below = depth - level;
    const std::size_t width = std::size_t{1} << below;
    const std::size_t zero_first = static_cast<std::size_t>(prefix << 1) << below;
    return {ArmSet{zero_first, width}, ArmSet{zero_first + width, width}};
}

struct CiBounds {
    double p_hat;
    double half_width;

    double lower() const noexcept { return p_hat - half_width; }
    double upper() const noexcept { return p_hat + half_width; }
};

/// Pooled reward rate of an arm set and its width gamma * sqrt(ln n / sum T).
/// An unexplored set has p_hat 0 and infinite width; gamma = 0 always gives
/// width 0.
inline CiBounds ci_bounds(const ArmStats& stats, ArmSet arms, double gamma, std::uint64_t n)
{
    std::uint64_t pulls = 0;
    std::uint64_t rewards = 0;
    for (std::size_t i = arms.first; i < arms.first + arms.count; ++i) {
        pulls += stats.pulls[i];
        rewards += stats.rewards[i];
    }
    if (gamma == 0.0) {
        return {pulls == 0 ? 0.0 : static_cast<double>(rewards) / static_cast<double>(pulls), 0.0};
    }
    if (pulls == 0) return {0.0, std::numeric_limits<double>::infinity()};
    const double t = static_cast<double>(pulls);
    return {static_cast<double>(rewards) / t, gamma * std::sqrt(std::log(static_cast<double>(n)) / t)};
}

/// Closed-interval intersection; touching endpoints overlap.
inline bool intervals_overlap(const CiBounds& a, const CiBounds& b) noexcept
{
    return a.lower() <= b.upper() && b.lower() <= a.upper();
}

struct CiParams {
    double gamma = 1.0;
    double beta = 1.5;
    std::uint64_t period = 100;
    double mag_min = 1e-4;
    double mag_max = 0.25;
    bool pull_to_zero = false;
};

/// Rescales Lambda and Omega of every threshold on the decision path:
/// overlapping intervals (order of the two halves still uncertain) divide by
/// beta, separated intervals multiply by beta. Magnitudes stay within
/// [mag_min, mag_max].
inline void ci_adjust(ThresholdTree& tree, const ArmStats& stats, const Decision& decision, const CiParams& params,
                      std::uint64_t n)
{
    for (unsigned m = 1; m <= decision.depth; ++m) {
        const std::uint64_t prefix = decision.prefix(m);
        const auto [zero, one] = arm_sets(decision.depth, m, prefix);
        const bool overlap = intervals_overlap(ci_bounds(stats, zero, params.gamma, n),
                                               ci_bounds(stats, one, params.gamma, n));
        const double factor = overlap ? 1.0 / params.beta : params.beta;
        double& lam = tree.lambda(m, prefix);
        double& om = tree.omega(m, prefix);
        lam = std::clamp(lam * factor, params.mag_min, params.mag_max);
        om = std::clamp(om * factor, params.mag_min, params.mag_max);
        if (overlap && params.pull_to_zero) tree.threshold(m, prefix) /= params.beta;
    }
}

// ---------------------------------------------------------------------------
// Signal-driven policies

struct ChaosParams {
    double alpha = 0.99;
    double lambda_init = 0.02;
    double omega_init = 0.02;
    std::uint64_t delta_l = 1;
    std::optional<std::uint64_t> delta_s;  // defaults to the tree depth M
    std::uint64_t tau_init = 0;
};

/// Chaos (thresholds only) and, when `ci` is set, Chaos-CI.
///
/// Holds a non-owning reference to the signal; the source must outlive the
/// policy.
class ChaosPolicy {
public:
    ChaosPolicy(unsigned depth, const SignalSource& source, ChaosParams params, std::optional<CiParams> ci = {},
                std::uint64_t signal_offset = 0)
        : tree_(depth, params.lambda_init, params.omega_init),
          source_(&source),
          params_(params),
          ci_(ci),
          tau_(params.tau_init + signal_offset),
          delta_s_(params.delta_s.value_or(depth))
    {
        if (params.delta_l < 1) throw std::invalid_argument("delta_l must be at least 1");
        if (delta_s_ < 1) throw std::invalid_argument("delta_s must be at least 1");
        if (ci_ && (ci_->period < 1 || !(ci_->beta > 1.0))) throw std::invalid_argument("bad CI parameters");
    }

    std::string_view name() const noexcept { return ci_ ? "chaos_ci" : "chaos"; }

    /// One full iteration: select, play, update thresholds, and every
    /// `period` steps rescale the path magnitudes (Chaos-CI only).
    StepOutcome step(const RewardEnvironment& env, Rng& rng, ArmStats& stats)
    {
        const std::uint64_t n = stats.step + 1;
        const Decision decision = chaos_select(tree_, *source_, tau_, params_.delta_l);
        const int reward = draw_reward(env, decision.arm, rng);
        stats.record(decision.arm, reward);
        chaos_update(tree_, decision, reward, params_.alpha);
        if (ci_ && n % ci_->period == 0) ci_adjust(tree_, stats, decision, *ci_, n);
        tau_ += delta_s_;
        return {decision.arm, reward};
    }

    const ThresholdTree& tree() const noexcept { return tree_; }
    std::uint64_t signal_position() const noexcept { return tau_; }

private:
    ThresholdTree tree_;
    const SignalSource* source_;
    ChaosParams params_;
    std::optional<CiParams> ci_;
    std::uint64_t tau_;
    std::uint64_t delta_s_;
};

// ---------------------------------------------------------------------------
// Policy selection by kind

enum class PolicyKind { round_robin, ucb1, chaos, chaos_ci };

inline constexpr std::array<PolicyKind, 4> kAllPolicies = {PolicyKind::round_robin, PolicyKind::ucb1,
                                                           PolicyKind::chaos, PolicyKind::chaos_ci};

inline std::string_view to_string(PolicyKind kind) noexcept
{
    switch (kind) {
    case PolicyKind::round_robin: return "round_robin";
    case PolicyKind::ucb1: return "ucb1";
    case PolicyKind::chaos: return "chaos";
    case PolicyKind::chaos_ci: return "chaos_ci";
    }
    return "?";
}

inline std::optional<PolicyKind> parse_policy(std::string_view name) noexcept
{
    for (PolicyKind kind : kAllPolicies) {
        if (to_string(kind) == name) return kind;
    }
    return std::nullopt;
}

inline bool uses_signal(PolicyKind kind) noexcept
{
    return kind == PolicyKind::chaos || kind == PolicyKind::chaos_ci;
}

using AnyPolicy = std::variant<RoundRobinPolicy, Ucb1Policy, ChaosPolicy>;

inline AnyPolicy make_policy(PolicyKind kind, unsigned depth, const SignalSource* source, const ChaosParams& chaos,
                             const CiParams& ci, std::uint64_t signal_offset)
{
    switch (kind) {
    case PolicyKind::round_robin: return RoundRobinPolicy{};
    case PolicyKind::ucb1: return Ucb1Policy{};
    case PolicyKind::chaos:
    case PolicyKind::chaos_ci:
        if (source == nullptr) throw std::invalid_argument("signal-driven policy needs a signal source");
        return ChaosPolicy(depth, *source, chaos,
                           kind == PolicyKind::chaos_ci ? std::optional<CiParams>(ci) : std::nullopt, signal_offset);
    }
    throw std::invalid_argument("unknown policy kind");
}

inline StepOutcome step(AnyPolicy& policy, const RewardEnvironment& env, Rng& rng, ArmStats& stats)
{
    return std::visit([&](auto& p) { return p.step(env, rng, stats); }, policy);
}

}  // namespace chaosmab

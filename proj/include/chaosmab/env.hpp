#pragma once

// Bernoulli reward environments and the environment-generation protocols.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chaosmab/csv.hpp"
#include "chaosmab/rng.hpp"

namespace chaosmab {

inline constexpr bool is_power_of_two(std::size_t k) noexcept { return k != 0 && (k & (k - 1)) == 0; }

inline unsigned log2_exact(std::size_t k) noexcept
{
    unsigned m = 0;
    while ((std::size_t{1} << m) < k) ++m;
    return m;
}

/// Reward means nu = (mu_0, ..., mu_{K-1}) with K = 2^M.
///
/// Means must be pairwise distinct and lie in [0, 1]. The experiment protocol
/// additionally keeps them strictly inside (0, 1) (see `is_open_unit`); the
/// closed interval is accepted so tests can build degenerate arms.
class RewardEnvironment {
public:
    explicit RewardEnvironment(std::vector<double> mus) : mus_(std::move(mus))
    {
        if (mus_.size() < 2 || !is_power_of_two(mus_.size()))
            throw std::invalid_argument("number of arms must be a power of two >= 2");
        for (double mu : mus_) {
            if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("reward mean outside [0, 1]");
        }
        order_.resize(mus_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(),
                         [this](std::size_t a, std::size_t b) { return mus_[a] > mus_[b]; });
        for (std::size_t k = 1; k < order_.size(); ++k) {
            if (mus_[order_[k]] == mus_[order_[k - 1]])
                throw std::invalid_argument("reward means must be pairwise distinct");
        }
        depth_ = log2_exact(mus_.size());
    }

    std::size_t arms() const noexcept { return mus_.size(); }
    unsigned depth() const noexcept { return depth_; }
    double mu(std::size_t arm) const { return mus_.at(arm); }
    const std::vector<double>& mus() const noexcept { return mus_; }

    std::size_t best_arm() const noexcept { return order_.front(); }
    double best_mean() const noexcept { return mus_[order_.front()]; }

    /// Arm of rank k (0-based: rank 0 is the best arm).
    std::size_t ranked(std::size_t k) const { return order_.at(k); }
    const std::vector<std::size_t>& true_order() const noexcept { return order_; }

    bool is_open_unit() const noexcept
    {
        return std::all_of(mus_.begin(), mus_.end(), [](double mu) { return mu > 0.0 && mu < 1.0; });
    }

    friend bool operator==(const RewardEnvironment& a, const RewardEnvironment& b) { return a.mus_ == b.mus_; }

private:
    std::vector<double> mus_;
    std::vector<std::size_t> order_;
    unsigned depth_ = 0;
};

/// The grid {0.1, 0.2, ..., 0.9}.
inline std::vector<double> default_value_grid()
{
    std::vector<double> grid;
    for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
    return grid;
}

/// Decimal grids carry representation error (0.4 - 0.1 != 0.3), so gaps are
/// compared with this slack.
inline constexpr double kGapTolerance = 1e-9;

inline void check_value_set(const std::vector<double>& values, std::size_t k)
{
    if (!is_power_of_two(k) || k < 2) throw std::invalid_argument("K must be a power of two >= 2");
    if (k > values.size()) throw std::invalid_argument("K exceeds the number of available values");
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (!(values[i] > values[i - 1])) throw std::invalid_argument("value set must be sorted ascending and distinct");
    }
}

/// All ordered assignments of K distinct grid values whose largest pairwise
/// gap equals `max_gap`. Output is lexicographic in the grid indices.
inline std::vector<RewardEnvironment> enumerate_envs(std::size_t k, const std::vector<double>& values, double max_gap)
{
    check_value_set(values, k);
    std::vector<RewardEnvironment> out;
    std::vector<std::size_t> pick(k, 0);
    std::vector<bool> used(values.size(), false);

    // depth-first over index tuples keeps the output lexicographic
    auto recurse = [&](auto&& self, std::size_t pos) -> void {
        if (pos == k) {
            double lo = values[pick[0]];
            double hi = lo;
            for (std::size_t idx : pick) {
                lo = std::min(lo, values[idx]);
                hi = std::max(hi, values[idx]);
            }
            if (std::abs((hi - lo) - max_gap) <= kGapTolerance) {
                std::vector<double> mus;
                mus.reserve(k);
                for (std::size_t idx : pick) mus.push_back(values[idx]);
                out.emplace_back(std::move(mus));
            }
            return;
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (used[i]) continue;
            used[i] = true;
            pick[pos] = i;
            self(self, pos + 1);
            used[i] = false;
        }
    };
    recurse(recurse, 0);
    return out;
}

/// `count` environments, each a uniformly drawn ordered K-subset of `values`.
inline std::vector<RewardEnvironment> sample_envs(std::size_t k, std::size_t count, const std::vector<double>& values,
                                                  std::uint64_t seed)
{
    check_value_set(values, k);
    Rng rng(seed);
    std::vector<RewardEnvironment> out;
    out.reserve(count);
    std::vector<double> pool;
    for (std::size_t c = 0; c < count; ++c) {
        pool = values;
        // partial Fisher-Yates: the first k slots are a uniform ordered k-subset
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        out.emplace_back(std::vector<double>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)));
    }
    return out;
}

/// One Bernoulli draw: 1 with probability mu_arm. Consumes exactly one draw.
inline int draw_reward(const RewardEnvironment& env, std::size_t arm, Rng& rng)
{
    if (arm >= env.arms()) throw std::out_of_range("arm index out of range");
    return rng.uniform() < env.mus()[arm] ? 1 : 0;
}

/// One row per environment: mu_0, ..., mu_{K-1}.
inline void write_envs_csv(std::ostream& out, std::size_t arms, const std::vector<RewardEnvironment>& envs)
{
    CsvRow header;
    for (std::size_t i = 0; i < arms; ++i) header << ("mu_" + std::to_string(i));
    out << header;
    for (const auto& env : envs) {
        CsvRow row;
        for (double mu : env.mus()) row << mu;
        out << row;
    }
}

}  // namespace chaosmab

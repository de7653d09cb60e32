#pragma once

// Randomized invariant checks shared by the unit suite and the acceptance
// binary. Each check runs `cases` independent cases from its own seed and
// reports the first failure it sees.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "chaosmab/env.hpp"
#include "chaosmab/policy.hpp"
#include "chaosmab/rng.hpp"
#include "chaosmab/signal.hpp"
#include "chaosmab/theory.hpp"

namespace props {

using namespace chaosmab;

struct PropertyResult {
    std::string name;
    std::uint64_t cases = 0;
    std::uint64_t failures = 0;
    std::string first_failure;

    bool ok() const { return failures == 0 && cases > 0; }
};

inline constexpr std::uint64_t kDefaultCases = 10000;

namespace detail {

inline double in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

inline void fail(PropertyResult& r, std::uint64_t c, const std::string& what)
{
    if (r.failures++ == 0) r.first_failure = "case " + std::to_string(c) + ": " + what;
}

/// Tree of random depth with thresholds anywhere in the signal range and
/// magnitudes in [0, 0.6].
inline ThresholdTree random_tree(Rng& rng, unsigned max_depth)
{
    const unsigned depth = 1 + static_cast<unsigned>(rng.below(max_depth));
    ThresholdTree tree(depth, 0.0, 0.0);
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const unsigned level = static_cast<unsigned>(std::bit_width(i + 1));
        const std::uint64_t prefix = (i + 1) - (std::uint64_t{1} << (level - 1));
        tree.threshold(level, prefix) = in(rng, -0.5, 0.5);
        tree.lambda(level, prefix) = in(rng, 0.0, 0.6);
        tree.omega(level, prefix) = in(rng, 0.0, 0.6);
    }
    return tree;
}

inline Decision random_decision(Rng& rng, unsigned depth)
{
    Decision d;
    d.depth = depth;
    d.arm = static_cast<std::size_t>(rng.below(std::uint64_t{1} << depth));
    return d;
}

inline ArmStats random_stats(Rng& rng, std::size_t arms)
{
    ArmStats s(arms);
    for (std::size_t i = 0; i < arms; ++i) {
        s.pulls[i] = rng.below(4) == 0 ? 0 : rng.below(200);
        s.rewards[i] = s.pulls[i] == 0 ? 0 : rng.below(s.pulls[i] + 1);
        s.step += s.pulls[i];
    }
    return s;
}

inline std::vector<bool> on_path(const Decision& d, std::size_t nodes)
{
    std::vector<bool> path(nodes, false);
    for (unsigned m = 1; m <= d.depth; ++m) path[ThresholdTree::node(m, d.prefix(m))] = true;
    return path;
}

inline CiParams random_ci(Rng& rng)
{
    CiParams p;
    p.gamma = rng.below(5) == 0 ? 0.0 : in(rng, 0.0, 3.0);
    p.beta = in(rng, 1.01, 3.0);
    p.mag_min = in(rng, 1e-5, 0.05);
    p.mag_max = in(rng, p.mag_min, 0.5);
    p.pull_to_zero = rng.below(2) == 1;
    return p;
}

}  // namespace detail

/// Thresholds never leave [-1/2, 1/2], whatever alpha, magnitudes and reward.
inline PropertyResult threshold_clamping(std::uint64_t seed, std::uint64_t cases = kDefaultCases)
{
    PropertyResult r{"threshold clamping", 0, 0, {}};
    Rng rng(seed);
    for (std::uint64_t c = 0; c < cases; ++c, ++r.cases) {
        ThresholdTree tree = detail::random_tree(rng, 8);
        const double alpha = detail::in(rng, 0.0, 1.0);
        for (int rep = 0; rep < 5; ++rep) {
            const Decision d = detail::random_decision(rng, tree.depth());
            chaos_update(tree, d, static_cast<int>(rng.below(2)), alpha);
            if (rng.below(3) == 0) {
                const ArmStats stats = detail::random_stats(rng, std::size_t{1} << tree.depth());
                ci_adjust(tree, stats, d, detail::random_ci(rng), std::max<std::uint64_t>(stats.step, 1));
            }
        }
        for (double th : tree.thresholds()) {
            if (!(th >= kSignalMin && th <= kSignalMax)) {
                detail::fail(r, c, "threshold " + std::to_string(th) + " outside the signal range");
                break;
            }
        }
    }
    return r;
}

/// Updates and CI rescaling touch only the M thresholds on the decision path.
inline PropertyResult path_only_mutation(std::uint64_t seed, std::uint64_t cases = kDefaultCases)
{
    PropertyResult r{"path-only mutation", 0, 0, {}};
    Rng rng(seed);
    for (std::uint64_t c = 0; c < cases; ++c, ++r.cases) {
        ThresholdTree tree = detail::random_tree(rng, 8);
        const ThresholdTree before = tree;
        const Decision d = detail::random_decision(rng, tree.depth());
        chaos_update(tree, d, static_cast<int>(rng.below(2)), detail::in(rng, 0.0, 1.0));
        const ArmStats stats = detail::random_stats(rng, std::size_t{1} << tree.depth());
        ci_adjust(tree, stats, d, detail::random_ci(rng), std::max<std::uint64_t>(stats.step, 1));
        const auto path = detail::on_path(d, tree.size());
        for (std::size_t i = 0; i < tree.size(); ++i) {
            if (path[i]) continue;
            if (tree.thresholds()[i] != before.thresholds()[i] || tree.lambdas()[i] != before.lambdas()[i] ||
                tree.omegas()[i] != before.omegas()[i]) {
                detail::fail(r, c, "off-path node " + std::to_string(i) + " changed");
                break;
            }
        }
    }
    return r;
}

/// Every policy records exactly one pull per step.
inline PropertyResult pulls_sum_to_steps(std::uint64_t seed, std::uint64_t cases = kDefaultCases)
{
    PropertyResult r{"sum of pulls equals steps", 0, 0, {}};
    Rng rng(seed);
    const SignalSource signal = gen_synthetic(SyntheticKind::uniform_iid, 4099, seed);
    for (std::uint64_t c = 0; c < cases; ++c, ++r.cases) {
        const unsigned depth = 1 + static_cast<unsigned>(rng.below(3));
        const std::size_t k = std::size_t{1} << depth;
        std::vector<double> mus(k);
        for (std::size_t i = 0; i < k; ++i) mus[i] = (static_cast<double>(i) + detail::in(rng, 0.05, 0.95)) / k;
        const RewardEnvironment env(mus);
        const PolicyKind kind = kAllPolicies[rng.below(kAllPolicies.size())];
        ChaosParams chaos;
        CiParams ci;
        ci.period = 1 + rng.below(20);
        AnyPolicy policy = make_policy(kind, depth, &signal, chaos, ci, rng.below(signal.length()));
        ArmStats stats(k);
        Rng draws(derive_seed(seed, c));
        const std::uint64_t n = 1 + rng.below(120);
        for (std::uint64_t t = 1; t <= n; ++t) {
            const auto outcome = step(policy, env, draws, stats);
            const auto total = std::accumulate(stats.pulls.begin(), stats.pulls.end(), std::uint64_t{0});
            if (total != t || stats.step != t || outcome.arm >= k) {
                detail::fail(r, c, std::string(to_string(kind)) + ": pulls sum to " + std::to_string(total) +
                                       " after " + std::to_string(t) + " steps");
                break;
            }
        }
    }
    return r;
}

/// I(0) and I(1) split the arms under a prefix into two halves of
/// 2^(M-m) arms each, and the m-th bit of every member is the set's label.
inline PropertyResult arm_set_partition(std::uint64_t seed, std::uint64_t cases = kDefaultCases)
{
    PropertyResult r{"arm-set partition", 0, 0, {}};
    Rng rng(seed);
    for (std::uint64_t c = 0; c < cases; ++c, ++r.cases) {
        const unsigned depth = 1 + static_cast<unsigned>(rng.below(12));
        const unsigned level = 1 + static_cast<unsigned>(rng.below(depth));
        const std::uint64_t prefix = rng.below(std::uint64_t{1} << (level - 1));
        const auto [zero, one] = arm_sets(depth, level, prefix);
        const std::size_t width = std::size_t{1} << (depth - level);
        bool good = zero.count == width && one.count == width && zero.first + width == one.first;
        // union is exactly the arms whose code starts with prefix
        const std::size_t k = std::size_t{1} << depth;
        std::size_t covered = 0;
        for (std::size_t a = 0; a < k && good; ++a) {
            const bool under = (a >> (depth - level + 1)) == prefix;
            const bool z = zero.contains(a);
            const bool o = one.contains(a);
            if (z && o) good = false;
            if ((z || o) != under) good = false;
            if (z || o) {
                ++covered;
                Decision d{depth, a, {}};
                if (d.bit(level) != (o ? 1 : 0)) good = false;
            }
        }
        if (!good || covered != 2 * width)
            detail::fail(r, c, "M=" + std::to_string(depth) + " m=" + std::to_string(level) + " prefix=" +
                                   std::to_string(prefix));
    }
    return r;
}

/// After a CI adjustment the path magnitudes sit inside [mag_min, mag_max].
inline PropertyResult magnitude_bounds(std::uint64_t seed, std::uint64_t cases = kDefaultCases)
{
    PropertyResult r{"magnitude bounds", 0, 0, {}};
    Rng rng(seed);
    for (std::uint64_t c = 0; c < cases; ++c, ++r.cases) {
        ThresholdTree tree = detail::random_tree(rng, 8);
        const CiParams params = detail::random_ci(rng);
        const Decision d = detail::random_decision(rng, tree.depth());
        const ArmStats stats = detail::random_stats(rng, std::size_t{1} << tree.depth());
        ci_adjust(tree, stats, d, params, std::max<std::uint64_t>(stats.step, 1));
        for (unsigned m = 1; m <= d.depth; ++m) {
            const double lam = tree.lambda(m, d.prefix(m));
            const double om = tree.omega(m, d.prefix(m));
            if (!(lam >= params.mag_min && lam <= params.mag_max && om >= params.mag_min && om <= params.mag_max)) {
                detail::fail(r, c, "magnitude outside bounds at level " + std::to_string(m));
                break;
            }
        }
    }
    return r;
}

/// Closed-form expectation satisfies w(n+1) = P + Q w(n) and starts at w1.
inline PropertyResult recurrence_identity(std::uint64_t seed, std::uint64_t cases = kDefaultCases)
{
    PropertyResult r{"expected-threshold recurrence", 0, 0, {}};
    Rng rng(seed);
    for (std::uint64_t c = 0; c < cases; ++c, ++r.cases) {
        TwoArmModel m;
        m.mu0 = rng.uniform();
        m.mu1 = rng.uniform();
        m.lambda = detail::in(rng, 0.0, 0.1);
        m.omega = detail::in(rng, 0.0, 0.1);
        m.alpha = detail::in(rng, 0.5, 0.9999);
        m.w1 = detail::in(rng, -0.5, 0.5);
        const auto [p, q] = pq_of(m);
        const std::uint64_t n = 1 + rng.below(200);
        const double wn = expected_threshold(m, n);
        const double next = expected_threshold(m, n + 1);
        const double scale = 1.0 + std::abs(wn) + std::abs(p / (1.0 - q));
        if (expected_threshold(m, 1) != m.w1 || std::abs(next - (p + q * wn)) > 1e-12 * scale)
            detail::fail(r, c, "n=" + std::to_string(n) + " q=" + std::to_string(q));
    }
    return r;
}

/// Synthetic signals stay in range and index modulo their length.
inline PropertyResult signal_range_and_wrap(std::uint64_t seed, std::uint64_t cases = kDefaultCases)
{
    PropertyResult r{"signal range and wrap", 0, 0, {}};
    Rng rng(seed);
    for (std::uint64_t c = 0; c < cases; ++c, ++r.cases) {
        const std::size_t len = 1 + rng.below(64);
        const auto kind = rng.below(2) == 0 ? SyntheticKind::uniform_iid : SyntheticKind::logistic_map;
        const SignalSource s = gen_synthetic(kind, len, rng.next());
        bool good = true;
        for (std::size_t i = 0; i < len && good; ++i) {
            const double v = s.at(i);
            good = v >= kSignalMin && v <= kSignalMax && s.at(i + len) == v && s.at(i + 7 * len) == v;
        }
        const std::uint64_t big = rng.next();
        good = good && s.at(big) == s.samples()[big % len];
        if (!good) detail::fail(r, c, "length " + std::to_string(len));
    }
    return r;
}

inline std::vector<PropertyResult> all_properties(std::uint64_t seed, std::uint64_t cases = kDefaultCases)
{
    return {
        threshold_clamping(derive_seed(seed, 1), cases),   path_only_mutation(derive_seed(seed, 2), cases),
        pulls_sum_to_steps(derive_seed(seed, 3), cases),   arm_set_partition(derive_seed(seed, 4), cases),
        magnitude_bounds(derive_seed(seed, 5), cases),     recurrence_identity(derive_seed(seed, 6), cases),
        signal_range_and_wrap(derive_seed(seed, 7), cases),
    };
}

}  // namespace props

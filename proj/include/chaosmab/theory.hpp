#pragma once

// Expected-threshold dynamics of the two-arm Chaos policy under a uniform
// signal on [-1/2, 1/2], and a Monte-Carlo simulator of the same recurrence
// that serves as its oracle.
//
// With w(n) the threshold before step n, arm 0 is played iff s < w(n), so
// P(A = 0) = 1/2 + w while |w| <= 1/2. Taking expectations of
//     w(n+1) = alpha w(n) + q(n)
// gives E[w(n+1)] = P + Q E[w(n)] with
//     P = (Lambda + Omega)(mu0 - mu1) / 2
//     Q = alpha + (Lambda + Omega)(mu0 + mu1) - 2 Omega.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "chaosmab/parallel.hpp"
#include "chaosmab/rng.hpp"

namespace chaosmab {

struct TwoArmModel {
    double mu0 = 0.5;
    double mu1 = 0.5;
    double lambda = 0.01;
    double omega = 0.01;
    double alpha = 0.99;
    double w1 = 0.0;

    void validate() const
    {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob(mu0) || !prob(mu1)) throw std::invalid_argument("reward means must lie in [0, 1]");
        if (!(lambda >= 0.0) || !(omega >= 0.0)) throw std::invalid_argument("magnitudes must be non-negative");
        if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
        if (!std::isfinite(w1)) throw std::invalid_argument("initial threshold must be finite");
    }
};

struct DriftContraction {
    double p;
    double q;
};

inline DriftContraction pq_of(const TwoArmModel& m)
{
    return {0.5 * (m.lambda + m.omega) * (m.mu0 - m.mu1),
            m.alpha + (m.lambda + m.omega) * (m.mu0 + m.mu1) - 2.0 * m.omega};
}

/// E[w(n)] for n >= 1. At Q = 1 the geometric sum degenerates to w1 + P (n - 1).
inline double expected_threshold(const TwoArmModel& m, std::uint64_t n)
{
    if (n < 1) throw std::invalid_argument("step must be at least 1");
    if (n == 1) return m.w1;
    const auto [p, q] = pq_of(m);
    const double steps = static_cast<double>(n - 1);
    if (q == 1.0) return m.w1 + p * steps;
    const double fixed = p / (1.0 - q);
    return fixed + std::pow(q, steps) * (m.w1 - fixed);
}

enum class Regime { linear_selection, saturating };

inline std::string_view to_string(Regime r) noexcept
{
    return r == Regime::linear_selection ? "linear-selection" : "saturating";
}

/// Linear selection needs a contracting recurrence (|Q| < 1) whose fixed point
/// stays inside the signal range (|P / (1 - Q)| < 1/2). Otherwise one arm
/// ends up selected almost always.
inline Regime classify_regime(const TwoArmModel& m)
{
    const auto [p, q] = pq_of(m);
    if (q == 1.0) {
        return p == 0.0 && std::abs(m.w1) < 0.5 ? Regime::linear_selection : Regime::saturating;
    }
    return std::abs(q) < 1.0 && std::abs(p / (1.0 - q)) < 0.5 ? Regime::linear_selection : Regime::saturating;
}

/// Trial-averaged w(n), n = 1..n_max (index n - 1), with standard errors.
struct ThresholdTrajectory {
    std::vector<double> mean;
    std::vector<double> std_error;
};

inline constexpr std::size_t kTrialsPerChunk = 1024;

/// Simulates the recurrence trial by trial: s ~ U[-1/2, 1/2), arm 0 iff
/// s < w, Bernoulli reward, w <- alpha w + q. Trial t uses its own stream
/// derived from (seed, t); per-chunk sums are folded in chunk order, so the
/// result does not depend on `jobs`.
inline ThresholdTrajectory mc_two_arm(const TwoArmModel& m, std::uint64_t n_max, std::uint64_t trials,
                                      std::uint64_t seed, unsigned jobs = 1)
{
    m.validate();
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");

    const std::size_t steps = static_cast<std::size_t>(n_max);
    const std::size_t chunks = static_cast<std::size_t>((trials + kTrialsPerChunk - 1) / kTrialsPerChunk);
    std::vector<std::vector<double>> sum(chunks), sum_sq(chunks);

    parallel_for(chunks, jobs, [&](std::size_t c) {
        auto& s1 = sum[c];
        auto& s2 = sum_sq[c];
        s1.assign(steps, 0.0);
        s2.assign(steps, 0.0);
        const std::uint64_t begin = c * kTrialsPerChunk;
        const std::uint64_t end = std::min<std::uint64_t>(trials, begin + kTrialsPerChunk);
        for (std::uint64_t t = begin; t < end; ++t) {
            Rng rng(derive_seed(seed, t));
            double w = m.w1;
            for (std::size_t i = 0; i < steps; ++i) {
                s1[i] += w;
                s2[i] += w * w;
                const bool arm0 = rng.uniform() - 0.5 < w;
                const bool hit = rng.uniform() < (arm0 ? m.mu0 : m.mu1);
                double q;
                if (arm0) q = hit ? m.lambda : -m.omega;
                else q = hit ? -m.lambda : m.omega;
                w = m.alpha * w + q;
            }
        }
    });

    ThresholdTrajectory out;
    out.mean.assign(steps, 0.0);
    out.std_error.assign(steps, 0.0);
    const double count = static_cast<double>(trials);
    for (std::size_t i = 0; i < steps; ++i) {
        double a = 0.0;
        double b = 0.0;
        for (std::size_t c = 0; c < chunks; ++c) {
            a += sum[c][i];
            b += sum_sq[c][i];
        }
        const double mean = a / count;
        out.mean[i] = mean;
        if (trials > 1) {
            const double var = std::max(0.0, (b - count * mean * mean) / (count - 1.0));
            out.std_error[i] = std::sqrt(var / count);
        }
    }
    return out;
}

}  // namespace chaosmab

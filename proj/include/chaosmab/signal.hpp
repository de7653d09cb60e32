#pragma once

// Amplitude sequences that drive bit decisions. Every source is normalized to
// [-1/2, +1/2] so the two-arm threshold analysis applies to it directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chaosmab/csv.hpp"
#include "chaosmab/error.hpp"
#include "chaosmab/rng.hpp"

namespace chaosmab {

enum class SignalOrigin { recorded, uniform_iid, logistic_map };

enum class TraceFormat { int8_binary, float_text };

enum class SyntheticKind { uniform_iid, logistic_map };

inline constexpr double kSignalMin = -0.5;
inline constexpr double kSignalMax = 0.5;

inline std::string_view to_string(SignalOrigin origin)
{
    switch (origin) {
    case SignalOrigin::recorded: return "recorded";
    case SignalOrigin::uniform_iid: return "uniform";
    case SignalOrigin::logistic_map: return "logistic";
    }
    return "?";
}

/// Immutable, normalized amplitude sequence. Indices past the end wrap around.
class SignalSource {
public:
    SignalSource(std::vector<double> samples, SignalOrigin origin, std::uint64_t seed = 0)
        : samples_(std::move(samples)), origin_(origin), seed_(seed)
    {
        if (samples_.empty()) throw std::invalid_argument("signal source needs at least one sample");
        for (double s : samples_) {
            if (!(s >= kSignalMin && s <= kSignalMax))
                throw std::invalid_argument("signal sample outside [-0.5, 0.5]");
        }
    }

    double at(std::uint64_t index) const noexcept { return samples_[index % samples_.size()]; }

    std::size_t length() const noexcept { return samples_.size(); }
    const std::vector<double>& samples() const noexcept { return samples_; }
    SignalOrigin origin() const noexcept { return origin_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::vector<double> samples_;
    SignalOrigin origin_;
    std::uint64_t seed_;
};

inline double sample_at(const SignalSource& source, std::uint64_t index) noexcept
{
    return source.at(index);
}

/// Affine map of the observed [min, max] onto [-1/2, +1/2]. A constant trace
/// has no range to map and becomes all zeros.
inline std::vector<double> normalize_to_signal_range(const std::vector<double>& raw)
{
    std::vector<double> out(raw.size(), 0.0);
    if (raw.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) return out;
    const double span = hi - lo;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        double v = (raw[i] - lo) / span - 0.5;
        out[i] = std::clamp(v, kSignalMin, kSignalMax);
    }
    // exact endpoints, independent of rounding in the division
    out[static_cast<std::size_t>(lo_it - raw.begin())] = kSignalMin;
    out[static_cast<std::size_t>(hi_it - raw.begin())] = kSignalMax;
    return out;
}

inline std::vector<double> read_trace(const std::string& path, TraceFormat format)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open signal file '" + path + "'");

    std::vector<double> raw;
    if (format == TraceFormat::int8_binary) {
        std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        if (in.bad()) throw IoError("read error on signal file '" + path + "'");
        raw.reserve(bytes.size());
        for (char b : bytes) raw.push_back(static_cast<double>(static_cast<std::int8_t>(b)));
    } else {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto last = line.find_last_not_of(" \t\r");
            const std::string token = line.substr(first, last - first + 1);
            std::size_t used = 0;
            double value = 0.0;
            try {
                value = std::stod(token, &used);
            } catch (const std::exception&) {
                throw IoError(path + ":" + std::to_string(line_no) + ": not a number: '" + token + "'");
            }
            if (used != token.size())
                throw IoError(path + ":" + std::to_string(line_no) + ": trailing characters in '" + token + "'");
            if (!std::isfinite(value))
                throw IoError(path + ":" + std::to_string(line_no) + ": non-finite value");
            raw.push_back(value);
        }
        if (in.bad()) throw IoError("read error on signal file '" + path + "'");
    }
    if (raw.empty()) throw IoError("signal file '" + path + "' holds no samples");
    return raw;
}

/// Loads a recorded trace and normalizes it over its observed range.
inline SignalSource load_recorded(const std::string& path, TraceFormat format)
{
    return SignalSource(normalize_to_signal_range(read_trace(path, format)), SignalOrigin::recorded);
}

/// Seed-derived logistic-map start point in (0, 1), avoiding 0.5 (maps to the
/// absorbing 0) and 0.75 (fixed point).
inline double logistic_start(std::uint64_t seed)
{
    Rng rng(derive_seed(seed, 0x10615UL));
    for (;;) {
        const double x = rng.uniform();
        if (x > 0.0 && x != 0.5 && x != 0.75) return x;
    }
}

/// Synthetic surrogate signal.
///
/// uniform_iid draws i.i.d. U[-1/2, 1/2). logistic_map iterates
/// x <- 4x(1-x) and emits x - 1/2; its invariant density is the arcsine law,
/// not uniform, so it stresses the policies differently from uniform_iid.
/// In double precision the orbit can land on 0 or 1 and stick there; when
/// that happens the state is re-drawn from the seeded stream. A forced start
/// (`x0`) is taken as given, including the fixed point 0.75.
inline SignalSource gen_synthetic(SyntheticKind kind, std::size_t length, std::uint64_t seed,
                                  std::optional<double> x0 = std::nullopt)
{
    if (length == 0) throw std::invalid_argument("synthetic signal length must be at least 1");
    std::vector<double> samples;
    samples.reserve(length);
    if (kind == SyntheticKind::uniform_iid) {
        Rng rng(seed);
        for (std::size_t i = 0; i < length; ++i) samples.push_back(rng.uniform() - 0.5);
        return SignalSource(std::move(samples), SignalOrigin::uniform_iid, seed);
    }

    if (x0 && !(*x0 >= 0.0 && *x0 <= 1.0)) throw std::invalid_argument("logistic start must lie in [0, 1]");
    Rng reinject(derive_seed(seed, 0xdeadUL));
    double x = x0 ? *x0 : logistic_start(seed);
    const bool forced = x0.has_value();
    for (std::size_t i = 0; i < length; ++i) {
        samples.push_back(x - 0.5);
        x = 4.0 * x * (1.0 - x);
        if (!forced && (x <= 0.0 || x >= 1.0)) {
            do {
                x = reinject.uniform();
            } while (x <= 0.0);
        }
    }
    return SignalSource(std::move(samples), SignalOrigin::logistic_map, seed);
}

/// Float-text serialization, one shortest-round-trip decimal per line.
inline void write_float_text(std::ostream& out, const SignalSource& source)
{
    std::string line;
    for (double s : source.samples()) {
        line.clear();
        append_number(line, s);
        line.push_back('\n');
        out << line;
    }
}

}  // namespace chaosmab

#pragma once

// Locale-independent number formatting for the CSV and text outputs.
// std::to_chars gives the shortest representation that round-trips, so equal
// doubles always print as equal bytes.

#include <charconv>
#include <concepts>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>

namespace chaosmab {

inline void append_number(std::string& out, double value)
{
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) {
        out += "nan";
        return;
    }
    out.append(buf, end);
}

template <std::integral T>
void append_number(std::string& out, T value)
{
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    out.append(buf, ec == std::errc{} ? end : buf);
}

/// Builds one comma-separated row. Fields are emitted verbatim.
class CsvRow {
public:
    template <typename T>
    CsvRow& operator<<(const T& value)
    {
        if (!first_) line_.push_back(',');
        first_ = false;
        if constexpr (std::is_convertible_v<const T&, std::string_view>) {
            line_.append(std::string_view(value));
        } else {
            append_number(line_, value);
        }
        return *this;
    }

    std::string str() const { return line_ + '\n'; }

private:
    std::string line_;
    bool first_ = true;
};

inline std::ostream& operator<<(std::ostream& out, const CsvRow& row) { return out << row.str(); }

}  // namespace chaosmab

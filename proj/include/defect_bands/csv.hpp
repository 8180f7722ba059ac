#pragma once

#include <charconv>
#include <ostream>
#include <string>
#include <system_error>

namespace defect_bands {

/// Shortest decimal text that reads back to exactly the same double.
inline std::string format_double(double v) {
    if (v == 0.0) return "0";  // folds -0 so output does not depend on summation sign
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, end);
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    CsvWriter& field(const std::string& s) {
        sep();
        out_ << s;
        return *this;
    }
    CsvWriter& field(double v) { return field(format_double(v)); }
    CsvWriter& field(long v) { return field(std::to_string(v)); }
    CsvWriter& field(int v) { return field(std::to_string(v)); }
    CsvWriter& field(std::size_t v) { return field(std::to_string(v)); }

    void end_row() {
        out_ << '\n';
        first_ = true;
    }

private:
    void sep() {
        if (!first_) out_ << ',';
        first_ = false;
    }

    std::ostream& out_;
    bool first_ = true;
};

}  // namespace defect_bands

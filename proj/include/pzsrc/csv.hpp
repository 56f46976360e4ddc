#ifndef PZSRC_CSV_HPP
#define PZSRC_CSV_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pzsrc/errors.hpp"

namespace pzsrc::csv {

// All CSV output is UTF-8, comma-separated with a header row; floats use a
// fixed 6-decimal format.

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw data_error("cannot open CSV for writing: " + path.string());
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

} // namespace pzsrc::csv

#endif

#ifndef PZSRC_ERRORS_HPP
#define PZSRC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pzsrc {

// Error taxonomy mirrored by the CLI exit codes:
//   config_error -> 2, data_error -> 3, numeric_error -> 4.

class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace pzsrc

#endif

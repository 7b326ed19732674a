#ifndef HTRM_ERRORS_HPP
#define HTRM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace htrm {

/// Bad user input: a config key, a spec field, or a precondition on an argument.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical routine failed to converge or produced non-finite values.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ConfigError(message);
    }
}

} // namespace htrm

#endif

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace foredif {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape / dimension mismatch.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Bad user configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// File read/write failure (CLI exit code 3).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Training produced a non-finite loss (CLI exit code 4).
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

/// Checkpoint incompatible with requested model or dataset (CLI exit code 5).
class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& msg) : Error(msg) {}
};

/// Advective CFL bound violated in the spectral stepper.
class CflError : public Error {
public:
    explicit CflError(const std::string& msg) : Error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_into(std::ostringstream& os, T&& head, Rest&&... rest) {
    os << std::forward<T>(head);
    format_into(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <typename E = Error, typename... Args>
[[noreturn]] void raise(Args&&... args) {
    std::ostringstream os;
    detail::format_into(os, std::forward<Args>(args)...);
    throw E(os.str());
}

}  // namespace foredif

#define FD_CHECK(cond, ...)                               \
    do {                                                  \
        if (!(cond)) ::foredif::raise(__VA_ARGS__);       \
    } while (0)

#define FD_CHECK_T(ErrType, cond, ...)                            \
    do {                                                          \
        if (!(cond)) ::foredif::raise<ErrType>(__VA_ARGS__);      \
    } while (0)

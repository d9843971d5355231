#pragma once

#include <stdexcept>
#include <string>

namespace nfcds {

/// Failure categories. The CLI maps each onto a process exit code.
enum class ErrorKind {
    Config,     // invalid parameters or configuration keys
    Shape,      // incompatible tensor dimensions
    Io,         // file or transport failure
    Numerical,  // non-finite state, solver breakdown, consistency violation
    Bridge,     // external denoiser protocol violation
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};
struct BridgeError : Error {
    explicit BridgeError(const std::string& w) : Error(ErrorKind::Bridge, w) {}
};

namespace detail {
template <typename E>
inline void check(bool cond, const std::string& msg) {
    if (!cond) throw E(msg);
}
}  // namespace detail

}  // namespace nfcds

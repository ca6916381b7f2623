#ifndef FEDMED_COMMON_HPP
#define FEDMED_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedmed {

/// Closed interval of intensities an image declares for its pixels.
struct ValueRange {
    double lo = 0.0;
    double hi = 1.0;

    double span() const { return hi - lo; }
    bool degenerate() const { return !(span() > 0.0); }
    bool operator==(const ValueRange&) const = default;

    static ValueRange unit() { return {0.0, 1.0}; }      // metric range
    static ValueRange training() { return {-1.0, 1.0}; } // network range
};

class NotFoundError : public std::runtime_error {
public:
    explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

class InvalidStateError : public std::runtime_error {
public:
    explicit InvalidStateError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed file contents; carries the file and byte offset of the problem.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::uint64_t offset, const std::string& what)
        : std::runtime_error(file + " @" + std::to_string(offset) + ": " + what),
          file_(file),
          offset_(offset) {}

    const std::string& file() const { return file_; }
    std::uint64_t offset() const { return offset_; }

private:
    std::string file_;
    std::uint64_t offset_;
};

/// A loss turned non-finite during training; message names round/client/step.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fedmed

#endif // FEDMED_COMMON_HPP

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace packfem {

using index_t = std::uint32_t;
using Vec3 = std::array<double, 3>;

/// Marks an empty (padding) slot in a pack.
inline constexpr index_t kPad = std::numeric_limits<index_t>::max();

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed mesh/field file. The message carries the offending line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Geometry failure (inverted or singular element).
class GeometryError : public Error {
public:
    GeometryError(std::size_t element, const std::string& what)
        : Error("element " + std::to_string(element) + ": " + what), element_(element) {}

    std::size_t element() const noexcept { return element_; }

private:
    std::size_t element_;
};

} // namespace packfem

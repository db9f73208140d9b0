#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace packfem {

/// Linear element shapes. The enumerator order is the canonical group order.
enum class ElementShape : int { Tet4 = 0, Pyr5 = 1, Pri6 = 2, Hex8 = 3 };

inline constexpr std::array<ElementShape, 4> kAllShapes{
    ElementShape::Tet4, ElementShape::Pyr5, ElementShape::Pri6, ElementShape::Hex8};

inline constexpr int kMaxNodes = 8;
inline constexpr int kMaxGauss = 8;

// Linear elements carry as many Gauss points as nodes.
constexpr int node_count(ElementShape s) noexcept
{
    switch (s) {
    case ElementShape::Tet4: return 4;
    case ElementShape::Pyr5: return 5;
    case ElementShape::Pri6: return 6;
    case ElementShape::Hex8: return 8;
    }
    return 0;
}

constexpr int gauss_count(ElementShape s) noexcept { return node_count(s); }

constexpr std::size_t shape_index(ElementShape s) noexcept { return static_cast<std::size_t>(s); }

constexpr std::string_view shape_name(ElementShape s) noexcept
{
    switch (s) {
    case ElementShape::Tet4: return "TET4";
    case ElementShape::Pyr5: return "PYR5";
    case ElementShape::Pri6: return "PRI6";
    case ElementShape::Hex8: return "HEX8";
    }
    return "?";
}

inline std::optional<ElementShape> parse_shape(std::string_view name) noexcept
{
    for (auto s : kAllShapes)
        if (shape_name(s) == name) return s;
    return std::nullopt;
}

} // namespace packfem

#pragma once

#include "packfem/shape.hpp"
#include "packfem/types.hpp"

#include <array>
#include <cmath>
#include <span>

namespace packfem {

// Reference elements and local node order:
//   TET4  (0,0,0) (1,0,0) (0,1,0) (0,0,1)
//   PYR5  base (-1,-1,0) (1,-1,0) (1,1,0) (-1,1,0), apex (0,0,1)
//   PRI6  triangle (0,0) (1,0) (0,1) at z=0, then the same at z=1
//   HEX8  unit cube, bottom face counter-clockwise then top face

/// Shape-function values, reference gradients and Gauss weights of one shape.
struct ShapeTable {
    ElementShape shape{};
    int nnodes = 0;
    int ngauss = 0;
    std::array<std::array<double, kMaxGauss>, kMaxNodes> N{};                   // N[in][ig]
    std::array<std::array<std::array<double, kMaxGauss>, kMaxNodes>, 3> dN{};   // dN[d][in][ig]
    std::array<double, kMaxGauss> w{};
    std::array<Vec3, kMaxGauss> points{};
};

/// Volume of the reference element.
constexpr double reference_volume(ElementShape s) noexcept
{
    switch (s) {
    case ElementShape::Tet4: return 1.0 / 6.0;
    case ElementShape::Pyr5: return 4.0 / 3.0;
    case ElementShape::Pri6: return 0.5;
    case ElementShape::Hex8: return 1.0;
    }
    return 0.0;
}

/// Reference node coordinates.
inline std::span<const Vec3> reference_nodes(ElementShape s) noexcept
{
    static constexpr std::array<Vec3, 4> tet{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    static constexpr std::array<Vec3, 5> pyr{{{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}, {0, 0, 1}}};
    static constexpr std::array<Vec3, 6> pri{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}}};
    static constexpr std::array<Vec3, 8> hex{
        {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};
    switch (s) {
    case ElementShape::Tet4: return tet;
    case ElementShape::Pyr5: return pyr;
    case ElementShape::Pri6: return pri;
    case ElementShape::Hex8: return hex;
    }
    return {};
}

namespace detail {

// Basis values and reference gradients at one point; grad[in] = (d/dxi, d/deta, d/dzeta).
inline void evaluate_basis(ElementShape s, const Vec3& p, std::span<double> value, std::span<Vec3> grad)
{
    const double x = p[0], y = p[1], z = p[2];
    switch (s) {
    case ElementShape::Tet4:
        value[0] = 1.0 - x - y - z;
        value[1] = x;
        value[2] = y;
        value[3] = z;
        grad[0] = {-1, -1, -1};
        grad[1] = {1, 0, 0};
        grad[2] = {0, 1, 0};
        grad[3] = {0, 0, 1};
        return;
    case ElementShape::Pyr5: {
        // Rational basis, conforming with linear tets on the triangular faces.
        const double u = 1.0 - z;
        const auto base = reference_nodes(s);
        for (int i = 0; i < 4; ++i) {
            const double xi = base[i][0], eta = base[i][1];
            const double a = u + xi * x, b = u + eta * y;
            value[i] = a * b / (4.0 * u);
            grad[i] = {xi * b / (4.0 * u), eta * a / (4.0 * u), -0.25 + xi * eta * x * y / (4.0 * u * u)};
        }
        value[4] = z;
        grad[4] = {0, 0, 1};
        return;
    }
    case ElementShape::Pri6: {
        const std::array<double, 3> tri{1.0 - x - y, x, y};
        const std::array<Vec3, 3> dtri{{{-1, -1, 0}, {1, 0, 0}, {0, 1, 0}}};
        for (int k = 0; k < 3; ++k) {
            value[k] = tri[k] * (1.0 - z);
            value[k + 3] = tri[k] * z;
            grad[k] = {dtri[k][0] * (1.0 - z), dtri[k][1] * (1.0 - z), -tri[k]};
            grad[k + 3] = {dtri[k][0] * z, dtri[k][1] * z, tri[k]};
        }
        return;
    }
    case ElementShape::Hex8: {
        const auto nodes = reference_nodes(s);
        for (int i = 0; i < 8; ++i) {
            const double fx = nodes[i][0] > 0.5 ? x : 1.0 - x;
            const double fy = nodes[i][1] > 0.5 ? y : 1.0 - y;
            const double fz = nodes[i][2] > 0.5 ? z : 1.0 - z;
            const double sx = nodes[i][0] > 0.5 ? 1.0 : -1.0;
            const double sy = nodes[i][1] > 0.5 ? 1.0 : -1.0;
            const double sz = nodes[i][2] > 0.5 ? 1.0 : -1.0;
            value[i] = fx * fy * fz;
            grad[i] = {sx * fy * fz, fx * sy * fz, fx * fy * sz};
        }
        return;
    }
    }
}

struct GaussRule {
    std::array<Vec3, kMaxGauss> points{};
    std::array<double, kMaxGauss> weights{};
    int count = 0;
};

inline GaussRule gauss_rule(ElementShape s)
{
    GaussRule r;
    switch (s) {
    case ElementShape::Tet4: {
        // Degree-2 rule, a = (5 - sqrt 5)/20, b = (5 + 3 sqrt 5)/20 (Keast / Zienkiewicz tables).
        constexpr double a = 0.13819660112501051518;
        constexpr double b = 0.58541019662496845446;
        r.points = {{{a, a, a}, {b, a, a}, {a, b, a}, {a, a, b}}};
        r.weights.fill(0.0);
        for (int i = 0; i < 4; ++i) r.weights[i] = 1.0 / 24.0;
        r.count = 4;
        break;
    }
    case ElementShape::Pyr5: {
        // 4 symmetric base points plus one axis point. The z-nodes are the 2-point
        // Gauss-Jacobi nodes for weight (1-z)^2 on [0,1]; exact for all quadratics.
        constexpr double zb = 0.12251482265544137787;
        constexpr double a = 0.53542491757518377180;
        constexpr double wb = 0.23254745125350790275;
        constexpr double za = 0.54415184401122528880;
        constexpr double wa = 0.40314352831930172233;
        r.points = {{{-a, -a, zb}, {a, -a, zb}, {a, a, zb}, {-a, a, zb}, {0, 0, za}}};
        r.weights = {wb, wb, wb, wb, wa};
        r.count = 5;
        break;
    }
    case ElementShape::Pri6: {
        // 3-point (edge-interior) triangle rule x 2-point Gauss-Legendre.
        constexpr double g0 = 0.21132486540518711775;
        constexpr double g1 = 0.78867513459481288225;
        constexpr std::array<std::array<double, 2>, 3> tri{{{1.0 / 6.0, 1.0 / 6.0}, {2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0}}};
        int ig = 0;
        for (double z : {g0, g1})
            for (const auto& t : tri) {
                r.points[ig] = {t[0], t[1], z};
                r.weights[ig] = 1.0 / 12.0;
                ++ig;
            }
        r.count = 6;
        break;
    }
    case ElementShape::Hex8: {
        // 2x2x2 Gauss-Legendre on [0,1]^3.
        constexpr std::array<double, 2> g{0.21132486540518711775, 0.78867513459481288225};
        int ig = 0;
        for (double z : g)
            for (double y : g)
                for (double x : g) {
                    r.points[ig] = {x, y, z};
                    r.weights[ig] = 0.125;
                    ++ig;
                }
        r.count = 8;
        break;
    }
    }
    return r;
}

inline ShapeTable build_shape_table(ElementShape s)
{
    ShapeTable t;
    t.shape = s;
    t.nnodes = node_count(s);
    t.ngauss = gauss_count(s);
    const GaussRule rule = gauss_rule(s);
    std::array<double, kMaxNodes> value{};
    std::array<Vec3, kMaxNodes> grad{};
    for (int ig = 0; ig < t.ngauss; ++ig) {
        t.points[ig] = rule.points[ig];
        t.w[ig] = rule.weights[ig];
        evaluate_basis(s, rule.points[ig], value, grad);
        for (int in = 0; in < t.nnodes; ++in) {
            t.N[in][ig] = value[in];
            for (int d = 0; d < 3; ++d) t.dN[d][in][ig] = grad[in][d];
        }
    }
    return t;
}

} // namespace detail

/// Immutable per-shape table, built once.
inline const ShapeTable& shape_table(ElementShape s)
{
    static const std::array<ShapeTable, 4> tables{
        detail::build_shape_table(ElementShape::Tet4), detail::build_shape_table(ElementShape::Pyr5),
        detail::build_shape_table(ElementShape::Pri6), detail::build_shape_table(ElementShape::Hex8)};
    return tables[shape_index(s)];
}

/// Weighted Jacobian determinants and physical gradients at the Gauss points.
struct ElementGeometry {
    std::array<double, kMaxGauss> detJ{};                                        // det(J) * w
    std::array<std::array<std::array<double, kMaxGauss>, kMaxNodes>, 3> gradN{}; // gradN[e][in][ig]
};

/// Jacobian J[d][e] = d x_e / d xi_d at Gauss point ig and its determinant.
inline double jacobian_at(const ShapeTable& t, std::span<const Vec3> coords, int ig, std::array<std::array<double, 3>, 3>& J)
{
    for (int d = 0; d < 3; ++d)
        for (int e = 0; e < 3; ++e) {
            double acc = 0.0;
            for (int in = 0; in < t.nnodes; ++in) acc += t.dN[d][in][ig] * coords[in][e];
            J[d][e] = acc;
        }
    return J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1])
         - J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0])
         + J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
}

/// Throws GeometryError for a singular map (|det J| < 1e-300). Inversion is not
/// checked here; callers that need positive orientation test detJ themselves.
inline ElementGeometry element_geometry(const ShapeTable& t, std::span<const Vec3> coords, std::size_t element_id = 0)
{
    if (coords.size() != static_cast<std::size_t>(t.nnodes))
        throw Error("element_geometry: expected " + std::to_string(t.nnodes) + " nodes, got " + std::to_string(coords.size()));
    ElementGeometry g;
    std::array<std::array<double, 3>, 3> J{};
    for (int ig = 0; ig < t.ngauss; ++ig) {
        const double det = jacobian_at(t, coords, ig, J);
        if (!(std::abs(det) >= 1e-300)) throw GeometryError(element_id, "singular Jacobian");
        const double inv = 1.0 / det;
        // Jinv[e][d] = cofactor(d, e) / det
        std::array<std::array<double, 3>, 3> Ji;
        Ji[0][0] = (J[1][1] * J[2][2] - J[1][2] * J[2][1]) * inv;
        Ji[0][1] = (J[0][2] * J[2][1] - J[0][1] * J[2][2]) * inv;
        Ji[0][2] = (J[0][1] * J[1][2] - J[0][2] * J[1][1]) * inv;
        Ji[1][0] = (J[1][2] * J[2][0] - J[1][0] * J[2][2]) * inv;
        Ji[1][1] = (J[0][0] * J[2][2] - J[0][2] * J[2][0]) * inv;
        Ji[1][2] = (J[0][2] * J[1][0] - J[0][0] * J[1][2]) * inv;
        Ji[2][0] = (J[1][0] * J[2][1] - J[1][1] * J[2][0]) * inv;
        Ji[2][1] = (J[0][1] * J[2][0] - J[0][0] * J[2][1]) * inv;
        Ji[2][2] = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) * inv;
        g.detJ[ig] = det * t.w[ig];
        for (int in = 0; in < t.nnodes; ++in)
            for (int e = 0; e < 3; ++e)
                g.gradN[e][in][ig] = Ji[e][0] * t.dN[0][in][ig] + Ji[e][1] * t.dN[1][in][ig] + Ji[e][2] * t.dN[2][in][ig];
    }
    return g;
}

} // namespace packfem

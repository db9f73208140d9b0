#pragma once

#include "packfem/packfem.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

namespace packfem::test {

inline std::string fixture(const std::string& name) { return std::string(PACKFEM_FIXTURE_DIR) + "/" + name; }

inline std::filesystem::path scratch_dir()
{
    auto p = std::filesystem::temp_directory_path() / ("packfem_tests_" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p;
}

struct Affine {
    double A[3][3];
    Vec3 b;

    Vec3 operator()(const Vec3& x) const
    {
        Vec3 y = b;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) y[i] += A[i][j] * x[j];
        return y;
    }
};

inline double det3(const double (&A)[3][3])
{
    return A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) - A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
           A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
}

// Orientation-preserving, reasonably conditioned random affine map.
inline Affine random_affine(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-0.4, 0.4), t(-5.0, 5.0), s(0.3, 3.0);
    Affine f{};
    const double scale = s(rng);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) f.A[i][j] = scale * ((i == j ? 1.0 : 0.0) + u(rng));
        f.b[i] = t(rng);
    }
    if (det3(f.A) < 0.0)
        for (int i = 0; i < 3; ++i) f.A[i][0] = -f.A[i][0];
    return f;
}

inline std::vector<Vec3> mapped_reference(ElementShape s, const Affine& f)
{
    std::vector<Vec3> out;
    for (const auto& x : reference_nodes(s)) out.push_back(f(x));
    return out;
}

inline double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d)
{
    const double M[3][3] = {{b[0] - a[0], c[0] - a[0], d[0] - a[0]}, {b[1] - a[1], c[1] - a[1], d[1] - a[1]}, {b[2] - a[2], c[2] - a[2], d[2] - a[2]}};
    return std::abs(det3(M)) / 6.0;
}

// Volume by splitting into tets (valid for affine images, whose faces are planar).
inline double volume_by_tets(ElementShape s, const std::vector<Vec3>& x)
{
    switch (s) {
    case ElementShape::Tet4: return tet_volume(x[0], x[1], x[2], x[3]);
    case ElementShape::Pyr5: return tet_volume(x[0], x[1], x[2], x[4]) + tet_volume(x[0], x[2], x[3], x[4]);
    case ElementShape::Pri6:
        return tet_volume(x[0], x[1], x[2], x[3]) + tet_volume(x[1], x[2], x[3], x[4]) + tet_volume(x[2], x[3], x[4], x[5]);
    case ElementShape::Hex8:
        return tet_volume(x[0], x[1], x[2], x[6]) + tet_volume(x[0], x[2], x[3], x[6]) + tet_volume(x[0], x[3], x[7], x[6]) +
               tet_volume(x[0], x[7], x[4], x[6]) + tet_volume(x[0], x[4], x[5], x[6]) + tet_volume(x[0], x[5], x[1], x[6]);
    }
    return 0.0;
}

inline Mesh single_element(ElementShape s, const std::vector<Vec3>& coords)
{
    Mesh m;
    m.nodes = coords;
    ElementBlock b{s, {}};
    for (std::size_t i = 0; i < coords.size(); ++i) b.connectivity.push_back(static_cast<index_t>(i));
    m.blocks.push_back(b);
    return m;
}

// Two tets sharing the face (1,2,3).
inline Mesh two_tets()
{
    Mesh m;
    m.nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
    m.blocks.push_back({ElementShape::Tet4, {0, 1, 2, 3, 1, 3, 2, 4}});
    return m;
}

// `count` disjoint unit-ish tets in a row.
inline Mesh tet_row(std::size_t count)
{
    Mesh m;
    ElementBlock b{ElementShape::Tet4, {}};
    for (std::size_t e = 0; e < count; ++e) {
        const double x0 = 2.0 * static_cast<double>(e);
        const auto base = static_cast<index_t>(m.nodes.size());
        m.nodes.push_back({x0, 0, 0});
        m.nodes.push_back({x0 + 1, 0, 0});
        m.nodes.push_back({x0, 1, 0});
        m.nodes.push_back({x0, 0, 1});
        for (index_t k = 0; k < 4; ++k) b.connectivity.push_back(base + k);
    }
    m.blocks.push_back(b);
    return m;
}

// ---------------------------------------------------------------------------
// Graphs
// ---------------------------------------------------------------------------

using Edges = std::vector<std::pair<index_t, index_t>>;

inline Edges path_edges(std::size_t n)
{
    Edges e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({index_t(i), index_t(i + 1)});
    return e;
}

inline Edges grid_edges(std::size_t nx, std::size_t ny)
{
    Edges e;
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const auto v = index_t(j * nx + i);
            if (i + 1 < nx) e.push_back({v, v + 1});
            if (j + 1 < ny) e.push_back({v, index_t(v + nx)});
        }
    return e;
}

// K1,(n-1) with the centre labelled n-1.
inline Edges star_edges(std::size_t n)
{
    Edges e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({index_t(i), index_t(n - 1)});
    return e;
}

// Random labelled spanning tree plus `extra` random chords; connected by construction.
inline Edges random_connected(std::size_t n, std::size_t extra, std::mt19937_64& rng)
{
    std::vector<index_t> label(n);
    for (std::size_t i = 0; i < n; ++i) label[i] = index_t(i);
    std::shuffle(label.begin(), label.end(), rng);
    Edges e;
    for (std::size_t i = 1; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        e.push_back({label[i], label[pick(rng)]});
    }
    std::uniform_int_distribution<index_t> any(0, index_t(n - 1));
    for (std::size_t k = 0; k < extra; ++k) {
        const index_t a = any(rng), b = any(rng);
        if (a != b) e.push_back({a, b});
    }
    return e;
}

// Brute-force bandwidth straight from an edge list.
inline std::size_t edge_bandwidth(const Edges& e, const std::vector<index_t>& forward)
{
    std::size_t bw = 0;
    for (auto [a, b] : e) {
        const auto pa = forward[a], pb = forward[b];
        bw = std::max<std::size_t>(bw, pa > pb ? pa - pb : pb - pa);
    }
    return bw;
}

inline std::vector<index_t> identity_order(std::size_t n)
{
    std::vector<index_t> id(n);
    for (std::size_t i = 0; i < n; ++i) id[i] = index_t(i);
    return id;
}

} // namespace packfem::test

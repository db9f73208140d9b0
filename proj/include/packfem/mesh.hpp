#pragma once

#include "packfem/quadrature.hpp"
#include "packfem/shape.hpp"
#include "packfem/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace packfem {

/// Connectivity of all elements of one shape, row-major [count x nnodes].
struct ElementBlock {
    ElementShape shape{};
    std::vector<index_t> connectivity;

    int nnodes() const noexcept { return node_count(shape); }
    std::size_t size() const noexcept { return connectivity.size() / static_cast<std::size_t>(nnodes()); }
    std::span<const index_t> element(std::size_t e) const noexcept
    {
        return {connectivity.data() + e * static_cast<std::size_t>(nnodes()), static_cast<std::size_t>(nnodes())};
    }

    bool operator==(const ElementBlock&) const = default;
};

/// Unstructured mixed-shape mesh. Blocks are kept in canonical shape order, at
/// most one per shape; global element ids run through the blocks in that order.
struct Mesh {
    std::vector<Vec3> nodes;
    std::vector<ElementBlock> blocks;

    std::size_t node_count() const noexcept { return nodes.size(); }

    std::size_t element_count() const noexcept
    {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.size();
        return n;
    }

    const ElementBlock* block(ElementShape s) const noexcept
    {
        for (const auto& b : blocks)
            if (b.shape == s) return &b;
        return nullptr;
    }

    /// First global element id of each block (same order as `blocks`).
    std::vector<std::size_t> block_offsets() const
    {
        std::vector<std::size_t> off(blocks.size());
        std::size_t n = 0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            off[b] = n;
            n += blocks[b].size();
        }
        return off;
    }

    /// (block index, local index) of a global element id.
    std::pair<std::size_t, std::size_t> locate(std::size_t element) const noexcept
    {
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (element < blocks[b].size()) return {b, element};
            element -= blocks[b].size();
        }
        return {blocks.size(), 0};
    }

    std::size_t count(ElementShape s) const noexcept
    {
        const auto* b = block(s);
        return b ? b->size() : 0;
    }

    bool operator==(const Mesh&) const = default;
};

/// Puts blocks in canonical shape order. Throws on duplicate shape blocks.
inline void canonicalize(Mesh& mesh)
{
    std::stable_sort(mesh.blocks.begin(), mesh.blocks.end(),
                     [](const ElementBlock& a, const ElementBlock& b) { return a.shape < b.shape; });
    for (std::size_t b = 1; b < mesh.blocks.size(); ++b)
        if (mesh.blocks[b].shape == mesh.blocks[b - 1].shape)
            throw Error(std::string("duplicate element block ") + std::string(shape_name(mesh.blocks[b].shape)));
}

inline std::array<Vec3, kMaxNodes> gather_coords(const Mesh& mesh, std::span<const index_t> element)
{
    std::array<Vec3, kMaxNodes> x{};
    for (std::size_t i = 0; i < element.size(); ++i) x[i] = mesh.nodes[element[i]];
    return x;
}

/// det(J) at the reference centroid; its sign gives the element orientation.
inline double orientation(ElementShape s, std::span<const Vec3> coords)
{
    Vec3 c{};
    switch (s) {
    case ElementShape::Tet4: c = {0.25, 0.25, 0.25}; break;
    case ElementShape::Pyr5: c = {0.0, 0.0, 0.25}; break;
    case ElementShape::Pri6: c = {1.0 / 3.0, 1.0 / 3.0, 0.5}; break;
    case ElementShape::Hex8: c = {0.5, 0.5, 0.5}; break;
    }
    std::array<double, kMaxNodes> value{};
    std::array<Vec3, kMaxNodes> grad{};
    detail::evaluate_basis(s, c, value, grad);
    double J[3][3] = {};
    for (int d = 0; d < 3; ++d)
        for (int e = 0; e < 3; ++e)
            for (int in = 0; in < node_count(s); ++in) J[d][e] += grad[in][d] * coords[in][e];
    return J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) - J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0])
         + J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
}

/// Flips local numbering so the reference map has the opposite orientation.
inline void flip_orientation(ElementShape s, std::span<index_t> nodes)
{
    switch (s) {
    case ElementShape::Tet4: std::swap(nodes[1], nodes[2]); break;
    case ElementShape::Pyr5: std::swap(nodes[1], nodes[3]); break;
    case ElementShape::Pri6:
        std::swap(nodes[1], nodes[2]);
        std::swap(nodes[4], nodes[5]);
        break;
    case ElementShape::Hex8:
        std::swap(nodes[1], nodes[3]);
        std::swap(nodes[5], nodes[7]);
        break;
    }
}

// ---------------------------------------------------------------------------
// Box generator
// ---------------------------------------------------------------------------

enum class MixPolicy { AllTet, AllHex, Mixed };

namespace detail {

class BoxBuilder {
public:
    BoxBuilder(std::size_t nx, std::size_t ny, std::size_t nz) : nx_(nx), ny_(ny), nz_(nz)
    {
        for (auto s : kAllShapes) mesh_.blocks.push_back({s, {}});
        mesh_.nodes.reserve((nx + 1) * (ny + 1) * (nz + 1));
        for (std::size_t k = 0; k <= nz; ++k)
            for (std::size_t j = 0; j <= ny; ++j)
                for (std::size_t i = 0; i <= nx; ++i)
                    mesh_.nodes.push_back({double(i) / double(nx), double(j) / double(ny), double(k) / double(nz)});
    }

    index_t corner(std::size_t i, std::size_t j, std::size_t k, int di, int dj, int dk) const
    {
        return static_cast<index_t>((i + di) + (nx_ + 1) * ((j + dj) + (ny_ + 1) * (k + dk)));
    }

    void add(ElementShape s, std::initializer_list<index_t> nodes)
    {
        std::array<index_t, kMaxNodes> n{};
        std::copy(nodes.begin(), nodes.end(), n.begin());
        std::array<Vec3, kMaxNodes> x{};
        for (int i = 0; i < node_count(s); ++i) x[i] = mesh_.nodes[n[i]];
        if (orientation(s, std::span(x.data(), node_count(s))) < 0.0) flip_orientation(s, std::span(n.data(), node_count(s)));
        auto& conn = mesh_.blocks[shape_index(s)].connectivity;
        conn.insert(conn.end(), n.begin(), n.begin() + node_count(s));
    }

    void hex(std::size_t i, std::size_t j, std::size_t k)
    {
        auto c = [&](int a, int b, int d) { return corner(i, j, k, a, b, d); };
        add(ElementShape::Hex8, {c(0, 0, 0), c(1, 0, 0), c(1, 1, 0), c(0, 1, 0), c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1)});
    }

    // Freudenthal (Kuhn) split along the (0,0,0)-(1,1,1) diagonal; every face
    // diagonal joins the face's min corner to its max corner.
    void kuhn(std::size_t i, std::size_t j, std::size_t k)
    {
        static constexpr std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
        for (const auto& p : perms) {
            std::array<int, 3> a{0, 0, 0};
            const index_t v0 = corner(i, j, k, 0, 0, 0);
            a[p[0]] = 1;
            const index_t v1 = corner(i, j, k, a[0], a[1], a[2]);
            a[p[1]] = 1;
            const index_t v2 = corner(i, j, k, a[0], a[1], a[2]);
            add(ElementShape::Tet4, {v0, v1, v2, corner(i, j, k, 1, 1, 1)});
        }
    }

    // Triangle in (y,z) extruded along x: bottom, top and y-faces stay full quads.
    void prisms(std::size_t i, std::size_t j, std::size_t k)
    {
        auto c = [&](int a, int b, int d) { return corner(i, j, k, a, b, d); };
        add(ElementShape::Pri6, {c(0, 0, 0), c(0, 1, 0), c(0, 1, 1), c(1, 0, 0), c(1, 1, 0), c(1, 1, 1)});
        add(ElementShape::Pri6, {c(0, 0, 0), c(0, 1, 1), c(0, 0, 1), c(1, 0, 0), c(1, 1, 1), c(1, 0, 1)});
    }

    // Cell around a new center node: one pyramid on the bottom quad, two tets per other face.
    void transition(std::size_t i, std::size_t j, std::size_t k)
    {
        const auto center = static_cast<index_t>(mesh_.nodes.size());
        mesh_.nodes.push_back({(double(i) + 0.5) / double(nx_), (double(j) + 0.5) / double(ny_), (double(k) + 0.5) / double(nz_)});
        auto c = [&](std::array<int, 3> l) { return corner(i, j, k, l[0], l[1], l[2]); };
        add(ElementShape::Pyr5, {c({0, 0, 0}), c({1, 0, 0}), c({1, 1, 0}), c({0, 1, 0}), center});
        // Remaining faces as cyclic corner lists in local coordinates.
        static constexpr std::array<std::array<std::array<int, 3>, 4>, 5> faces{{
            {{{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}},
            {{{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}},
            {{{0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1}}},
            {{{0, 0, 0}, {0, 1, 0}, {0, 1, 1}, {0, 0, 1}}},
            {{{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}},
        }};
        for (const auto& f : faces) {
            int m = 0;
            for (int q = 1; q < 4; ++q)
                if (f[q][0] + f[q][1] + f[q][2] < f[m][0] + f[m][1] + f[m][2]) m = q;
            const index_t a = c(f[m]), b = c(f[(m + 1) % 4]), d = c(f[(m + 2) % 4]), e = c(f[(m + 3) % 4]);
            add(ElementShape::Tet4, {a, b, d, center});
            add(ElementShape::Tet4, {a, d, e, center});
        }
    }

    Mesh finish() &&
    {
        std::erase_if(mesh_.blocks, [](const ElementBlock& b) { return b.connectivity.empty(); });
        return std::move(mesh_);
    }

private:
    std::size_t nx_, ny_, nz_;
    Mesh mesh_;
};

} // namespace detail

/// Structured box on [0,1]^3 with cells subdivided per `mix`.
///
/// MIXED stacks, from the bottom: hex and prism cells (hex on all but the last
/// bottom layer and on the j == 0 column), one transition layer (a pyramid on
/// each bottom quad plus tets around a cell-center node), and (nz-1)/2 layers of
/// 6-tet cells. All interfaces are conforming.
inline Mesh generate_box_mesh(std::size_t nx, std::size_t ny, std::size_t nz, MixPolicy mix)
{
    if (nx < 1 || ny < 1 || nz < 1) throw Error("generate_box_mesh: nx, ny, nz must be >= 1");
    if (mix == MixPolicy::Mixed && nz < 3) throw Error("generate_box_mesh: MIXED needs nz >= 3 for the transition layer");
    detail::BoxBuilder box(nx, ny, nz);
    const std::size_t tet_layers = (nz - 1) / 2;
    const std::size_t transition_layer = nz - tet_layers - 1;
    for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                switch (mix) {
                case MixPolicy::AllHex: box.hex(i, j, k); break;
                case MixPolicy::AllTet: box.kuhn(i, j, k); break;
                case MixPolicy::Mixed:
                    if (k > transition_layer)
                        box.kuhn(i, j, k);
                    else if (k == transition_layer)
                        box.transition(i, j, k);
                    else if (k + 1 < transition_layer || j == 0)
                        box.hex(i, j, k);
                    else
                        box.prisms(i, j, k);
                    break;
                }
            }
    return std::move(box).finish();
}

// ---------------------------------------------------------------------------
// Adjacency
// ---------------------------------------------------------------------------

/// Undirected graph in compressed form; neighbor lists sorted, symmetric, no self-loops.
class AdjacencyGraph {
public:
    AdjacencyGraph() = default;

    /// Builds from an edge list; duplicates and self-loops are dropped.
    static AdjacencyGraph from_edges(std::size_t n, std::span<const std::pair<index_t, index_t>> edges)
    {
        std::vector<std::vector<index_t>> adj(n);
        for (auto [a, b] : edges) {
            if (a == b) continue;
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        return from_lists(std::move(adj));
    }

    static AdjacencyGraph from_lists(std::vector<std::vector<index_t>> adj)
    {
        AdjacencyGraph g;
        g.offsets_.assign(adj.size() + 1, 0);
        for (std::size_t i = 0; i < adj.size(); ++i) {
            auto& l = adj[i];
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
            std::erase(l, static_cast<index_t>(i));
            g.offsets_[i + 1] = g.offsets_[i] + l.size();
        }
        g.neighbors_.reserve(g.offsets_.back());
        for (const auto& l : adj) g.neighbors_.insert(g.neighbors_.end(), l.begin(), l.end());
        return g;
    }

    std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t edge_count() const noexcept { return neighbors_.size() / 2; }
    std::size_t degree(std::size_t v) const noexcept { return offsets_[v + 1] - offsets_[v]; }
    std::span<const index_t> neighbors(std::size_t v) const noexcept
    {
        return {neighbors_.data() + offsets_[v], degree(v)};
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<index_t> neighbors_;
};

/// Nodes are adjacent iff they share at least one element.
inline AdjacencyGraph node_adjacency(const Mesh& mesh)
{
    std::vector<std::vector<index_t>> adj(mesh.node_count());
    for (const auto& b : mesh.blocks)
        for (std::size_t e = 0; e < b.size(); ++e) {
            const auto el = b.element(e);
            for (index_t a : el)
                for (index_t c : el) adj[a].push_back(c);
        }
    return AdjacencyGraph::from_lists(std::move(adj));
}

// ---------------------------------------------------------------------------
// Faces and boundary
// ---------------------------------------------------------------------------

/// Local faces of a shape; triangles carry -1 in the fourth slot.
inline std::span<const std::array<int, 4>> local_faces(ElementShape s) noexcept
{
    static constexpr std::array<std::array<int, 4>, 4> tet{{{0, 1, 2, -1}, {0, 1, 3, -1}, {1, 2, 3, -1}, {0, 2, 3, -1}}};
    static constexpr std::array<std::array<int, 4>, 5> pyr{{{0, 1, 2, 3}, {0, 1, 4, -1}, {1, 2, 4, -1}, {2, 3, 4, -1}, {3, 0, 4, -1}}};
    static constexpr std::array<std::array<int, 4>, 5> pri{{{0, 1, 2, -1}, {3, 4, 5, -1}, {0, 1, 4, 3}, {1, 2, 5, 4}, {2, 0, 3, 5}}};
    static constexpr std::array<std::array<int, 4>, 6> hex{
        {{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}}};
    switch (s) {
    case ElementShape::Tet4: return tet;
    case ElementShape::Pyr5: return pyr;
    case ElementShape::Pri6: return pri;
    case ElementShape::Hex8: return hex;
    }
    return {};
}

/// Every element face as a sorted node key (kPad in the fourth slot for triangles),
/// sorted so equal faces are adjacent.
inline std::vector<std::array<index_t, 4>> face_keys(const Mesh& mesh)
{
    std::vector<std::array<index_t, 4>> keys;
    for (const auto& b : mesh.blocks)
        for (std::size_t e = 0; e < b.size(); ++e) {
            const auto el = b.element(e);
            for (const auto& f : local_faces(b.shape)) {
                std::array<index_t, 4> k{kPad, kPad, kPad, kPad};
                for (int q = 0; q < 4; ++q)
                    if (f[q] >= 0) k[q] = el[f[q]];
                std::sort(k.begin(), k.end());
                keys.push_back(k);
            }
        }
    std::sort(keys.begin(), keys.end());
    return keys;
}

/// Nodes lying on faces that belong to exactly one element.
inline std::vector<index_t> boundary_nodes(const Mesh& mesh)
{
    const auto keys = face_keys(mesh);
    std::vector<char> on(mesh.node_count(), 0);
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i + 1;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        if (j - i == 1)
            for (index_t v : keys[i])
                if (v != kPad) on[v] = 1;
        i = j;
    }
    std::vector<index_t> out;
    for (std::size_t v = 0; v < on.size(); ++v)
        if (on[v]) out.push_back(static_cast<index_t>(v));
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Defect {
    enum class Kind { DuplicateNode, InvertedElement, IndexOutOfRange, RepeatedNode };
    Kind kind;
    std::size_t index; // node id for DuplicateNode, global element id otherwise
    std::string message;
};

/// Reports defects; an empty list means the mesh is valid.
inline std::vector<Defect> validate(const Mesh& mesh, double duplicate_tol = 1e-12)
{
    std::vector<Defect> defects;
    const std::size_t n = mesh.node_count();

    std::vector<index_t> order(n);
    std::iota(order.begin(), order.end(), index_t{0});
    std::sort(order.begin(), order.end(), [&](index_t a, index_t b) { return mesh.nodes[a][0] < mesh.nodes[b][0]; });
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n && mesh.nodes[order[b]][0] - mesh.nodes[order[a]][0] <= duplicate_tol; ++b) {
            const auto& p = mesh.nodes[order[a]];
            const auto& q = mesh.nodes[order[b]];
            const double d = std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]);
            if (d <= duplicate_tol) {
                const auto [lo, hi] = std::minmax(order[a], order[b]);
                defects.push_back({Defect::Kind::DuplicateNode, hi,
                                   "duplicate node " + std::to_string(hi) + " (coincides with " + std::to_string(lo) + ")"});
            }
        }

    std::size_t id = 0;
    for (const auto& b : mesh.blocks) {
        const auto& table = shape_table(b.shape);
        for (std::size_t e = 0; e < b.size(); ++e, ++id) {
            const auto el = b.element(e);
            const bool out_of_range = std::any_of(el.begin(), el.end(), [&](index_t v) { return v >= n; });
            if (out_of_range) {
                defects.push_back({Defect::Kind::IndexOutOfRange, id, "index out of range in element " + std::to_string(id)});
                continue;
            }
            std::array<index_t, kMaxNodes> sorted{};
            std::copy(el.begin(), el.end(), sorted.begin());
            std::sort(sorted.begin(), sorted.begin() + el.size());
            if (std::adjacent_find(sorted.begin(), sorted.begin() + el.size()) != sorted.begin() + el.size()) {
                defects.push_back({Defect::Kind::RepeatedNode, id, "repeated node in element " + std::to_string(id)});
                continue;
            }
            const auto x = gather_coords(mesh, el);
            std::array<std::array<double, 3>, 3> J{};
            for (int ig = 0; ig < table.ngauss; ++ig)
                if (!(jacobian_at(table, std::span(x.data(), el.size()), ig, J) > 0.0)) {
                    defects.push_back({Defect::Kind::InvertedElement, id, "inverted element " + std::to_string(id)});
                    break;
                }
        }
    }
    return defects;
}

} // namespace packfem

#pragma once

#include "packfem/mesh.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace packfem {

// ---------------------------------------------------------------------------
// Grouping
// ---------------------------------------------------------------------------

/// Elements sharing one shape, hence one (nnodes, ngauss) loop nest.
struct GroupIndex {
    ElementShape shape{};
    int nnodes = 0;
    int ngauss = 0;
    std::vector<index_t> element_ids; // global ids, mesh order
};

/// One group per non-empty shape block, in canonical shape order.
inline std::vector<GroupIndex> group_elements(const Mesh& mesh)
{
    std::vector<GroupIndex> groups;
    const auto offsets = mesh.block_offsets();
    for (auto s : kAllShapes)
        for (std::size_t b = 0; b < mesh.blocks.size(); ++b) {
            if (mesh.blocks[b].shape != s || mesh.blocks[b].size() == 0) continue;
            GroupIndex g{s, node_count(s), gauss_count(s), {}};
            g.element_ids.resize(mesh.blocks[b].size());
            std::iota(g.element_ids.begin(), g.element_ids.end(), static_cast<index_t>(offsets[b]));
            groups.push_back(std::move(g));
        }
    return groups;
}

// ---------------------------------------------------------------------------
// Renumbering
// ---------------------------------------------------------------------------

/// forward[old] = new, inverse[new] = old.
struct Permutation {
    std::vector<index_t> forward;
    std::vector<index_t> inverse;

    std::size_t size() const noexcept { return forward.size(); }

    static Permutation identity(std::size_t n)
    {
        Permutation p;
        p.forward.resize(n);
        std::iota(p.forward.begin(), p.forward.end(), index_t{0});
        p.inverse = p.forward;
        return p;
    }

    /// From a visiting order (order[new] = old).
    static Permutation from_order(std::vector<index_t> order)
    {
        Permutation p;
        p.forward.assign(order.size(), kPad);
        for (std::size_t i = 0; i < order.size(); ++i) p.forward[order[i]] = static_cast<index_t>(i);
        p.inverse = std::move(order);
        return p;
    }

    bool is_bijection() const
    {
        if (forward.size() != inverse.size()) return false;
        for (std::size_t i = 0; i < forward.size(); ++i)
            if (forward[i] >= inverse.size() || inverse[forward[i]] != i) return false;
        return true;
    }
};

/// max over edges (i,j) of |perm(i) - perm(j)|.
inline std::size_t bandwidth(const AdjacencyGraph& g, const Permutation& perm)
{
    std::size_t bw = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (index_t j : g.neighbors(i)) {
            const auto a = perm.forward[i], b = perm.forward[j];
            bw = std::max<std::size_t>(bw, a > b ? a - b : b - a);
        }
    return bw;
}

inline std::size_t bandwidth(const AdjacencyGraph& g) { return bandwidth(g, Permutation::identity(g.size())); }

namespace detail {

// BFS levels from root; returns (eccentricity, last level). `scratch` must be all -1
// on entry and is restored on exit.
inline std::pair<std::size_t, std::vector<index_t>> level_structure(const AdjacencyGraph& g, index_t root, std::vector<long>& scratch)
{
    std::vector<index_t> touched{root};
    std::vector<index_t> level{root}, next;
    scratch[root] = 0;
    std::size_t depth = 0;
    while (true) {
        next.clear();
        for (index_t v : level)
            for (index_t w : g.neighbors(v))
                if (scratch[w] < 0) {
                    scratch[w] = static_cast<long>(depth + 1);
                    next.push_back(w);
                    touched.push_back(w);
                }
        if (next.empty()) break;
        level.swap(next);
        ++depth;
    }
    for (index_t v : touched) scratch[v] = -1;
    return {depth, level};
}

} // namespace detail

/// George-Liu pseudo-peripheral vertex of the component containing `seed`.
inline index_t pseudo_peripheral(const AdjacencyGraph& g, index_t seed)
{
    std::vector<long> scratch(g.size(), -1);
    index_t root = seed;
    auto [ecc, last] = detail::level_structure(g, root, scratch);
    while (true) {
        index_t best = last.front();
        for (index_t v : last)
            if (g.degree(v) < g.degree(best) || (g.degree(v) == g.degree(best) && v < best)) best = v;
        auto [e2, l2] = detail::level_structure(g, best, scratch);
        if (e2 <= ecc) return root;
        root = best;
        ecc = e2;
        last = std::move(l2);
    }
}

/// Cuthill-McKee ordering. Components are processed in discovery order (lowest
/// unvisited index); each starts from `start` (first component only) or from a
/// pseudo-peripheral vertex. Neighbors are queued by ascending degree, ties by
/// lower index. `reverse` yields RCM.
inline Permutation cuthill_mckee(const AdjacencyGraph& g, std::optional<index_t> start = std::nullopt, bool reverse = false)
{
    const std::size_t n = g.size();
    std::vector<index_t> order;
    order.reserve(n);
    std::vector<char> visited(n, 0);
    std::vector<index_t> nbrs;

    auto bfs = [&](index_t root) {
        std::size_t head = order.size();
        order.push_back(root);
        visited[root] = 1;
        while (head < order.size()) {
            const index_t v = order[head++];
            nbrs.clear();
            for (index_t w : g.neighbors(v))
                if (!visited[w]) {
                    visited[w] = 1;
                    nbrs.push_back(w);
                }
            std::sort(nbrs.begin(), nbrs.end(), [&](index_t a, index_t b) {
                return g.degree(a) != g.degree(b) ? g.degree(a) < g.degree(b) : a < b;
            });
            order.insert(order.end(), nbrs.begin(), nbrs.end());
        }
    };

    if (start && *start < n) bfs(*start);
    for (std::size_t v = 0; v < n; ++v)
        if (!visited[v]) bfs(pseudo_peripheral(g, static_cast<index_t>(v)));
    if (reverse) std::reverse(order.begin(), order.end());
    return Permutation::from_order(std::move(order));
}

/// Applies a node permutation, then sorts each block's elements (stably) by their
/// smallest renumbered node id.
inline Mesh renumber(const Mesh& mesh, const Permutation& nodes)
{
    if (nodes.size() != mesh.node_count()) throw Error("renumber: permutation size differs from node count");
    Mesh out;
    out.nodes.resize(mesh.node_count());
    for (std::size_t i = 0; i < mesh.node_count(); ++i) out.nodes[nodes.forward[i]] = mesh.nodes[i];
    for (const auto& b : mesh.blocks) {
        const std::size_t nn = static_cast<std::size_t>(b.nnodes());
        std::vector<index_t> key(b.size());
        std::vector<index_t> order(b.size());
        for (std::size_t e = 0; e < b.size(); ++e) {
            index_t m = kPad;
            for (index_t v : b.element(e)) m = std::min(m, nodes.forward[v]);
            key[e] = m;
        }
        std::iota(order.begin(), order.end(), index_t{0});
        std::stable_sort(order.begin(), order.end(), [&](index_t a, index_t c) { return key[a] < key[c]; });
        ElementBlock nb{b.shape, {}};
        nb.connectivity.reserve(b.connectivity.size());
        for (index_t e : order)
            for (std::size_t i = 0; i < nn; ++i) nb.connectivity.push_back(nodes.forward[b.connectivity[e * nn + i]]);
        out.blocks.push_back(std::move(nb));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Packing and padding
// ---------------------------------------------------------------------------

struct PackGroup {
    ElementShape shape{};
    int nnodes = 0;
    int ngauss = 0;
    std::size_t first_pack = 0;
    std::size_t pack_count = 0;
    std::size_t element_count = 0;
    std::size_t pad = 0;
};

/// Index structure over packs of `width` same-shape elements. Padding only
/// ever occupies the tail of a group's last pack. Node maps are stored per pack
/// as [nnodes][width] so the slot index is innermost.
class PackSet {
public:
    int width() const noexcept { return width_; }
    std::span<const PackGroup> groups() const noexcept { return groups_; }
    std::size_t pack_count() const noexcept { return pack_group_.size(); }
    std::size_t pad_total() const noexcept { return pad_total_; }
    std::size_t element_count() const noexcept { return element_count_; }
    std::size_t node_count() const noexcept { return node_count_; }
    const std::array<std::size_t, 4>& census() const noexcept { return census_; }

    const PackGroup& group_of(std::size_t pack) const noexcept { return groups_[pack_group_[pack]]; }

    /// Element id per slot, kPad for padding.
    std::span<const index_t> slots(std::size_t pack) const noexcept
    {
        return {slots_.data() + pack * static_cast<std::size_t>(width_), static_cast<std::size_t>(width_)};
    }

    /// Number of leading real slots.
    std::size_t real_slots(std::size_t pack) const noexcept { return real_[pack]; }

    /// Global node of (slot, local node); kPad for padding slots.
    index_t node(std::size_t pack, int slot, int local) const noexcept
    {
        return node_map_[node_offset_[pack] + static_cast<std::size_t>(local) * width_ + slot];
    }

    /// [nnodes][width] node map of a pack.
    std::span<const index_t> node_map(std::size_t pack) const noexcept
    {
        return {node_map_.data() + node_offset_[pack], static_cast<std::size_t>(group_of(pack).nnodes * width_)};
    }

private:
    friend PackSet build_packs(std::span<const GroupIndex>, const Mesh&, int);

    int width_ = 1;
    std::vector<PackGroup> groups_;
    std::vector<std::size_t> pack_group_;
    std::vector<index_t> slots_;
    std::vector<std::size_t> real_;
    std::vector<std::size_t> node_offset_;
    std::vector<index_t> node_map_;
    std::size_t pad_total_ = 0;
    std::size_t element_count_ = 0;
    std::size_t node_count_ = 0;
    std::array<std::size_t, 4> census_{};
};

/// Splits each group into packs of `width` slots, padding the last pack.
inline PackSet build_packs(std::span<const GroupIndex> groups, const Mesh& mesh, int width)
{
    if (width < 1) throw Error("build_packs: pack width must be >= 1");
    const auto W = static_cast<std::size_t>(width);
    PackSet ps;
    ps.width_ = width;
    ps.node_count_ = mesh.node_count();
    for (std::size_t b = 0; b < mesh.blocks.size(); ++b) ps.census_[shape_index(mesh.blocks[b].shape)] += mesh.blocks[b].size();

    for (const auto& g : groups) {
        PackGroup pg{g.shape, g.nnodes, g.ngauss, ps.pack_group_.size(), 0, g.element_ids.size(), 0};
        pg.pack_count = (g.element_ids.size() + W - 1) / W;
        pg.pad = pg.pack_count * W - g.element_ids.size();
        for (std::size_t p = 0; p < pg.pack_count; ++p) {
            ps.pack_group_.push_back(ps.groups_.size());
            ps.node_offset_.push_back(ps.node_map_.size());
            const std::size_t first = p * W;
            const std::size_t real = std::min(W, g.element_ids.size() - first);
            ps.real_.push_back(real);
            const std::size_t slot0 = ps.slots_.size();
            ps.slots_.resize(slot0 + W, kPad);
            ps.node_map_.resize(ps.node_map_.size() + static_cast<std::size_t>(g.nnodes) * W, kPad);
            index_t* map = ps.node_map_.data() + ps.node_offset_.back();
            for (std::size_t s = 0; s < real; ++s) {
                const index_t id = g.element_ids[first + s];
                const auto [blk, local] = mesh.locate(id);
                if (blk >= mesh.blocks.size() || mesh.blocks[blk].shape != g.shape)
                    throw Error("build_packs: element " + std::to_string(id) + " does not match its group shape");
                ps.slots_[slot0 + s] = id;
                const auto el = mesh.blocks[blk].element(local);
                for (int in = 0; in < g.nnodes; ++in) map[in * W + s] = el[in];
            }
        }
        ps.pad_total_ += pg.pad;
        ps.element_count_ += g.element_ids.size();
        ps.groups_.push_back(pg);
    }
    return ps;
}

/// pad_total = sum over groups of (W - |g| mod W) mod W.
constexpr std::size_t expected_padding(std::size_t group_size, std::size_t width) noexcept
{
    return (width - group_size % width) % width;
}

/// Per-pack nodal block stored [nnodes][width]; padding slots hold zero.
struct PackedBlock {
    int width = 0;
    int nnodes = 0;
    std::vector<double> values;

    double& at(int slot, int local) noexcept { return values[static_cast<std::size_t>(local) * width + slot]; }
    double at(int slot, int local) const noexcept { return values[static_cast<std::size_t>(local) * width + slot]; }
};

inline PackedBlock gather(std::span<const double> field, const PackSet& ps, std::size_t pack)
{
    const auto& g = ps.group_of(pack);
    PackedBlock blk{ps.width(), g.nnodes, std::vector<double>(static_cast<std::size_t>(g.nnodes) * ps.width(), 0.0)};
    const std::size_t real = ps.real_slots(pack);
    for (int in = 0; in < g.nnodes; ++in)
        for (std::size_t s = 0; s < real; ++s) blk.at(static_cast<int>(s), in) = field[ps.node(pack, static_cast<int>(s), in)];
    return blk;
}

/// target[node(s,i)] += values(s,i) over real slots only; padding slots are
/// skipped whatever they hold.
inline void scatter_add(const PackedBlock& blk, const PackSet& ps, std::size_t pack, std::span<double> target)
{
    const std::size_t real = ps.real_slots(pack);
    for (std::size_t s = 0; s < real; ++s)
        for (int in = 0; in < blk.nnodes; ++in) target[ps.node(pack, static_cast<int>(s), in)] += blk.at(static_cast<int>(s), in);
}

// ---------------------------------------------------------------------------
// Full preprocessing pipeline
// ---------------------------------------------------------------------------

enum class Renumbering { None, CuthillMcKee, ReverseCuthillMcKee };

struct Preprocessed {
    Mesh mesh; // renumbered
    Permutation node_order;
    std::vector<GroupIndex> groups;
    PackSet packs;
    std::size_t bandwidth_before = 0;
    std::size_t bandwidth_after = 0;
};

/// Grouping, renumbering, packing and padding, in that order.
inline Preprocessed preprocess(const Mesh& mesh, int width, Renumbering renumbering = Renumbering::CuthillMcKee)
{
    Preprocessed pp;
    const auto graph = node_adjacency(mesh);
    pp.bandwidth_before = bandwidth(graph);
    switch (renumbering) {
    case Renumbering::None: pp.node_order = Permutation::identity(mesh.node_count()); break;
    case Renumbering::CuthillMcKee: pp.node_order = cuthill_mckee(graph); break;
    case Renumbering::ReverseCuthillMcKee: pp.node_order = cuthill_mckee(graph, std::nullopt, true); break;
    }
    pp.bandwidth_after = bandwidth(graph, pp.node_order);
    pp.mesh = renumber(mesh, pp.node_order);
    pp.groups = group_elements(pp.mesh);
    pp.packs = build_packs(pp.groups, pp.mesh, width);
    return pp;
}

} // namespace packfem

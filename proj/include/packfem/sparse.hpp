#pragma once

#include "packfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace packfem {

/// Compressed sparse row matrix; columns strictly ascending within each row.
struct SparseMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<index_t> col;
    std::vector<double> val;

    std::size_t nnz() const noexcept { return col.size(); }

    std::span<const index_t> row_cols(std::size_t i) const noexcept
    {
        return {col.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
    }

    /// Position of (i, j) in `val` by binary search; npos if structurally absent.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t find(std::size_t i, std::size_t j) const noexcept
    {
        const auto* first = col.data() + row_ptr[i];
        const auto* last = col.data() + row_ptr[i + 1];
        const auto* it = std::lower_bound(first, last, static_cast<index_t>(j));
        return (it != last && *it == j) ? static_cast<std::size_t>(it - col.data()) : npos;
    }

    double at(std::size_t i, std::size_t j) const noexcept
    {
        const auto k = find(i, j);
        return k == npos ? 0.0 : val[k];
    }

    void zero() noexcept { std::fill(val.begin(), val.end(), 0.0); }

    bool same_pattern(const SparseMatrix& o) const noexcept { return n == o.n && row_ptr == o.row_ptr && col == o.col; }
};

/// Entry (i,j) present iff nodes i and j share an element, plus the diagonal.
inline SparseMatrix sparsity_pattern(const Mesh& mesh)
{
    const auto g = node_adjacency(mesh);
    SparseMatrix A;
    A.n = mesh.node_count();
    A.row_ptr.assign(A.n + 1, 0);
    for (std::size_t i = 0; i < A.n; ++i) A.row_ptr[i + 1] = A.row_ptr[i] + g.degree(i) + 1;
    A.col.reserve(A.row_ptr.back());
    for (std::size_t i = 0; i < A.n; ++i) {
        const auto nb = g.neighbors(i);
        const auto split = std::lower_bound(nb.begin(), nb.end(), static_cast<index_t>(i));
        A.col.insert(A.col.end(), nb.begin(), split);
        A.col.push_back(static_cast<index_t>(i));
        A.col.insert(A.col.end(), split, nb.end());
    }
    A.val.assign(A.col.size(), 0.0);
    return A;
}

inline void spmv(const SparseMatrix& A, std::span<const double> x, std::span<double> y)
{
    for (std::size_t i = 0; i < A.n; ++i) {
        double acc = 0.0;
        for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) acc += A.val[k] * x[A.col[k]];
        y[i] = acc;
    }
}

inline std::vector<double> spmv(const SparseMatrix& A, std::span<const double> x)
{
    if (x.size() != A.n) throw Error("spmv: dimension mismatch");
    std::vector<double> y(A.n);
    spmv(A, x, y);
    return y;
}

/// max |a - b| / (1 + |b|) over the union of both patterns.
inline double max_relative_difference(const SparseMatrix& a, const SparseMatrix& b)
{
    if (a.n != b.n) return INFINITY;
    double worst = 0.0;
    auto fold = [&](double x, double ref) {
        const double d = std::abs(x - ref) / (1.0 + std::abs(ref));
        worst = (std::isnan(d) || std::isnan(worst)) ? NAN : std::max(worst, d);
    };
    for (std::size_t i = 0; i < a.n; ++i) {
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) fold(a.val[k], b.at(i, a.col[k]));
        for (std::size_t k = b.row_ptr[i]; k < b.row_ptr[i + 1]; ++k)
            if (a.find(i, b.col[k]) == SparseMatrix::npos) fold(0.0, b.val[k]);
    }
    return worst;
}

inline double max_relative_difference(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i]));
        worst = (std::isnan(d) || std::isnan(worst)) ? NAN : std::max(worst, d);
    }
    return worst;
}

} // namespace packfem

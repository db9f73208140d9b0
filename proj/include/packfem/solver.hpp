#pragma once

#include "packfem/sparse.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace packfem {

struct SolveResult {
    std::vector<double> x;
    std::size_t iterations = 0;
    double final_residual = 0.0; // ||b - A x|| / ||b||, recomputed on convergence
    bool converged = false;
};

enum class Preconditioner { None, Jacobi };

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Relative residual ||A x - b|| / ||b|| computed from scratch.
inline double relative_residual(const SparseMatrix& A, std::span<const double> x, std::span<const double> b)
{
    const auto ax = spmv(A, x);
    double r = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) r += (ax[i] - b[i]) * (ax[i] - b[i]);
    const double nb = norm2(b);
    return nb > 0.0 ? std::sqrt(r) / nb : std::sqrt(r);
}

/// Conjugate gradients from x0 = 0 for symmetric positive definite A.
inline SolveResult cg_solve(const SparseMatrix& A, std::span<const double> b, double tol, std::size_t maxit,
                            Preconditioner pc = Preconditioner::None)
{
    if (!(tol > 0.0)) throw Error("cg_solve: tolerance must be positive");
    if (b.size() != A.n) throw Error("cg_solve: dimension mismatch");
    const std::size_t n = A.n;
    SolveResult res;
    res.x.assign(n, 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }

    std::vector<double> inv_diag(n, 1.0);
    if (pc == Preconditioner::Jacobi)
        for (std::size_t i = 0; i < n; ++i) {
            const double d = A.at(i, i);
            if (d != 0.0) inv_diag[i] = 1.0 / d;
        }

    std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    res.final_residual = 1.0;

    for (std::size_t it = 0; it < maxit; ++it) {
        spmv(A, p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) break; // breakdown: A not SPD on this Krylov space
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res.iterations = it + 1;
        res.final_residual = norm2(r) / bnorm;
        bool restart = false;
        if (res.final_residual <= tol) {
            // The recurrence drifts; confirm against the true residual and restart from it if needed.
            spmv(A, res.x, q);
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
            res.final_residual = norm2(r) / bnorm;
            if (res.final_residual <= tol) {
                res.converged = true;
                break;
            }
            restart = true;
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_next = dot(r, z);
        const double beta = restart ? 0.0 : rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return res;
}

/// Symmetric elimination of x[d] = value[d] for the listed rows: the known
/// columns move to the right-hand side, row and column d are zeroed except the
/// diagonal, which keeps its assembled value, and b[d] = A(d,d) * value[d].
inline void apply_dirichlet(SparseMatrix& A, std::span<double> b, std::span<const index_t> rows, std::span<const double> values)
{
    std::vector<char> fixed(A.n, 0);
    std::vector<double> g(A.n, 0.0);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        fixed[rows[k]] = 1;
        g[rows[k]] = values.empty() ? 0.0 : values[k];
    }
    for (std::size_t i = 0; i < A.n; ++i) {
        for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) {
            const index_t j = A.col[k];
            if (fixed[i]) {
                if (j != i) A.val[k] = 0.0;
            } else if (fixed[j]) {
                b[i] -= A.val[k] * g[j];
                A.val[k] = 0.0;
            }
        }
    }
    for (std::size_t i = 0; i < A.n; ++i)
        if (fixed[i]) b[i] = A.at(i, i) * g[i];
}

} // namespace packfem

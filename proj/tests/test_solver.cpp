#include "support.hpp"

#include <gtest/gtest.h>

using namespace packfem;
using namespace packfem::test;

namespace {

SparseMatrix tridiagonal(std::size_t n)
{
    SparseMatrix A;
    A.n = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            A.col.push_back(index_t(i - 1));
            A.val.push_back(-1.0);
        }
        A.col.push_back(index_t(i));
        A.val.push_back(2.0);
        if (i + 1 < n) {
            A.col.push_back(index_t(i + 1));
            A.val.push_back(-1.0);
        }
        A.row_ptr.push_back(A.col.size());
    }
    return A;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> b(n);
    for (auto& v : b) v = nd(rng);
    return b;
}

TEST(Cg, IdentityInOneIteration)
{
    SparseMatrix I;
    I.n = 6;
    for (index_t i = 0; i < 6; ++i) {
        I.col.push_back(i);
        I.val.push_back(1.0);
        I.row_ptr.push_back(i + 1);
    }
    const auto b = random_vector(6, 1);
    const auto r = cg_solve(I, b, 1e-12, 10);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 1u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(r.x[i], b[i], 1e-15);
}

TEST(Cg, TridiagonalLaplacian)
{
    const auto A = tridiagonal(4);
    const std::vector<double> b{1, 0, 0, 1};
    for (auto pc : {Preconditioner::None, Preconditioner::Jacobi}) {
        const auto r = cg_solve(A, b, 1e-14, 20, pc);
        ASSERT_TRUE(r.converged);
        EXPECT_LE(r.iterations, 4u);
        for (double v : r.x) EXPECT_NEAR(v, 1.0, 1e-13);
    }
}

TEST(Cg, MassSystemResidualRecomputed)
{
    const auto m = generate_box_mesh(2, 2, 2, MixPolicy::AllTet);
    const auto M = assemble_naive(m, KernelSpec::mass()).matrix;
    const auto b = random_vector(M.n, 7);
    for (auto pc : {Preconditioner::None, Preconditioner::Jacobi}) {
        const auto r = cg_solve(M, b, 1e-10, 3 * M.n, pc);
        ASSERT_TRUE(r.converged);
        EXPECT_LE(r.final_residual, 1e-10);
        EXPECT_LE(relative_residual(M, r.x, b), 1e-10);
        EXPECT_LE(r.iterations, 3 * M.n);
    }
}

TEST(Cg, ZeroRightHandSide)
{
    const auto A = tridiagonal(5);
    const auto r = cg_solve(A, std::vector<double>(5, 0.0), 1e-10, 10);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 0u);
    EXPECT_EQ(r.x, std::vector<double>(5, 0.0));
}

TEST(Cg, NonConvergenceReported)
{
    const auto A = tridiagonal(50);
    const auto b = random_vector(50, 3);
    const auto r = cg_solve(A, b, 1e-14, 3);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3u);
    EXPECT_GT(r.final_residual, 1e-14);
    EXPECT_LT(relative_residual(A, r.x, b), 1.0);
}

TEST(Cg, InvalidArguments)
{
    const auto A = tridiagonal(3);
    EXPECT_THROW(cg_solve(A, std::vector<double>(3, 1.0), 0.0, 10), Error);
    EXPECT_THROW(cg_solve(A, std::vector<double>(4, 1.0), 1e-8, 10), Error);
}

TEST(Cg, Deterministic)
{
    const auto m = generate_box_mesh(3, 3, 3, MixPolicy::Mixed);
    const auto M = assemble_naive(m, KernelSpec::mass()).matrix;
    const auto b = random_vector(M.n, 9);
    const auto a = cg_solve(M, b, 1e-12, 500, Preconditioner::Jacobi);
    const auto c = cg_solve(M, b, 1e-12, 500, Preconditioner::Jacobi);
    EXPECT_EQ(a.x, c.x);
    EXPECT_EQ(a.iterations, c.iterations);
}

TEST(Dirichlet, PoissonOnMixedMesh)
{
    const auto m = generate_box_mesh(4, 4, 4, MixPolicy::Mixed);
    auto sys = assemble_naive(m, KernelSpec::diffusion(1.0));
    const std::vector<double> f(m.node_count(), 1.0);
    sys.rhs = assemble_naive(m, KernelSpec::source_rhs(f)).rhs;
    const auto bnd = boundary_nodes(m);
    ASSERT_FALSE(bnd.empty());
    apply_dirichlet(sys.matrix, sys.rhs, bnd, {});

    for (index_t d : bnd) {
        EXPECT_EQ(sys.rhs[d], 0.0);
        for (std::size_t k = sys.matrix.row_ptr[d]; k < sys.matrix.row_ptr[d + 1]; ++k)
            if (sys.matrix.col[k] != d) {
                EXPECT_EQ(sys.matrix.val[k], 0.0);
                EXPECT_EQ(sys.matrix.at(sys.matrix.col[k], d), 0.0);
            }
        EXPECT_GT(sys.matrix.at(d, d), 0.0);
    }

    const auto r = cg_solve(sys.matrix, sys.rhs, 1e-10, 3 * sys.matrix.n, Preconditioner::Jacobi);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(relative_residual(sys.matrix, r.x, sys.rhs), 1e-10);
    for (index_t d : bnd) EXPECT_EQ(r.x[d], 0.0);
    // -lap u = 1 with zero walls: interior solution is positive and bounded by the 1D value 1/8.
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        EXPECT_GE(r.x[i], 0.0);
        EXPECT_LE(r.x[i], 0.125);
    }
}

TEST(Dirichlet, NonzeroValuesMoveToRightHandSide)
{
    // 1D chain: u0 = 1, u3 = 1 fixed; the harmonic interior is also 1.
    auto A = tridiagonal(4);
    std::vector<double> b(4, 0.0);
    const std::vector<index_t> rows{0, 3};
    const std::vector<double> vals{1.0, 1.0};
    apply_dirichlet(A, b, rows, vals);
    EXPECT_EQ(b[0], 2.0);
    EXPECT_EQ(b[1], 1.0);
    const auto r = cg_solve(A, b, 1e-14, 20);
    ASSERT_TRUE(r.converged);
    for (double v : r.x) EXPECT_NEAR(v, 1.0, 1e-13);
}

} // namespace

#pragma once

#include "packfem/packing.hpp"
#include "packfem/quadrature.hpp"
#include "packfem/sparse.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <span>
#include <thread>
#include <vector>

namespace packfem {

enum class KernelKind { Mass, Diffusion, Convection, SourceRhs };

inline constexpr std::array<KernelKind, 4> kAllKernels{KernelKind::Mass, KernelKind::Diffusion, KernelKind::Convection,
                                                      KernelKind::SourceRhs};

constexpr std::string_view kernel_name(KernelKind k) noexcept
{
    switch (k) {
    case KernelKind::Mass: return "mass";
    case KernelKind::Diffusion: return "diffusion";
    case KernelKind::Convection: return "convection";
    case KernelKind::SourceRhs: return "source";
    }
    return "?";
}

/// Elemental kernel and its coefficients. Nodal fields are interpolated to the
/// Gauss points with the shape functions.
struct KernelSpec {
    KernelKind kind = KernelKind::Mass;
    double diffusivity = 1.0;
    std::span<const Vec3> velocity;
    std::span<const double> source;

    static KernelSpec mass() { return {KernelKind::Mass, 1.0, {}, {}}; }
    static KernelSpec diffusion(double kappa) { return {KernelKind::Diffusion, kappa, {}, {}}; }
    static KernelSpec convection(std::span<const Vec3> u) { return {KernelKind::Convection, 1.0, u, {}}; }
    static KernelSpec source_rhs(std::span<const double> s) { return {KernelKind::SourceRhs, 1.0, {}, s}; }

    void check(std::size_t nnodes) const
    {
        if (kind == KernelKind::Convection && velocity.size() != nnodes)
            throw Error("convection kernel: velocity field has " + std::to_string(velocity.size()) + " entries, mesh has " +
                        std::to_string(nnodes) + " nodes");
        if (kind == KernelKind::SourceRhs && source.size() != nnodes)
            throw Error("source kernel: source field has " + std::to_string(source.size()) + " entries, mesh has " +
                        std::to_string(nnodes) + " nodes");
    }
};

struct AssemblyResult {
    SparseMatrix matrix;
    std::vector<double> rhs;
};

struct AssemblyOptions {
    bool parallel = false;
    unsigned threads = 0; // 0: hardware concurrency
    double pad_fill = 0.0; // value gathered into padding slots
};

inline constexpr std::array<int, 10> kSupportedWidths{1, 2, 4, 8, 16, 32, 64, 128, 256, 512};

constexpr bool is_supported_width(int w) noexcept
{
    return std::find(kSupportedWidths.begin(), kSupportedWidths.end(), w) != kSupportedWidths.end();
}

// ---------------------------------------------------------------------------
// Element-by-element assembly
// ---------------------------------------------------------------------------

/// Adds every element's contribution to A and rhs, one element at a time in
/// mesh order. A must carry the mesh's sparsity pattern.
inline void assemble_naive_into(const Mesh& mesh, const KernelSpec& kernel, SparseMatrix& A, std::span<double> rhs)
{
    kernel.check(mesh.node_count());
    std::size_t id = 0;
    for (const auto& b : mesh.blocks) {
        const auto& t = shape_table(b.shape);
        const int nnodes = t.nnodes, ngauss = t.ngauss;
        for (std::size_t e = 0; e < b.size(); ++e, ++id) {
            const auto el = b.element(e);
            const auto x = gather_coords(mesh, el);
            const ElementGeometry g = element_geometry(t, std::span(x.data(), el.size()), id);
            for (int ig = 0; ig < ngauss; ++ig)
                if (!(g.detJ[ig] > 0.0)) throw GeometryError(id, "inverted element");

            double Ae[kMaxNodes][kMaxNodes] = {};
            double be[kMaxNodes] = {};
            switch (kernel.kind) {
            case KernelKind::Mass:
                for (int ig = 0; ig < ngauss; ++ig)
                    for (int jn = 0; jn < nnodes; ++jn)
                        for (int in = 0; in < nnodes; ++in) Ae[in][jn] = Ae[in][jn] + g.detJ[ig] * t.N[in][ig] * t.N[jn][ig];
                break;
            case KernelKind::Diffusion:
                for (int ig = 0; ig < ngauss; ++ig)
                    for (int jn = 0; jn < nnodes; ++jn)
                        for (int in = 0; in < nnodes; ++in)
                            Ae[in][jn] = Ae[in][jn] + g.detJ[ig] * kernel.diffusivity *
                                                          (g.gradN[0][in][ig] * g.gradN[0][jn][ig] + g.gradN[1][in][ig] * g.gradN[1][jn][ig] +
                                                           g.gradN[2][in][ig] * g.gradN[2][jn][ig]);
                break;
            case KernelKind::Convection:
                for (int ig = 0; ig < ngauss; ++ig) {
                    double u[3];
                    for (int c = 0; c < 3; ++c) {
                        double acc = 0.0;
                        for (int kn = 0; kn < nnodes; ++kn) acc += t.N[kn][ig] * kernel.velocity[el[kn]][c];
                        u[c] = acc;
                    }
                    for (int jn = 0; jn < nnodes; ++jn) {
                        const double adv = u[0] * g.gradN[0][jn][ig] + u[1] * g.gradN[1][jn][ig] + u[2] * g.gradN[2][jn][ig];
                        for (int in = 0; in < nnodes; ++in) Ae[in][jn] = Ae[in][jn] + g.detJ[ig] * t.N[in][ig] * adv;
                    }
                }
                break;
            case KernelKind::SourceRhs:
                for (int ig = 0; ig < ngauss; ++ig) {
                    double acc = 0.0;
                    for (int kn = 0; kn < nnodes; ++kn) acc += t.N[kn][ig] * kernel.source[el[kn]];
                    for (int in = 0; in < nnodes; ++in) be[in] = be[in] + g.detJ[ig] * t.N[in][ig] * acc;
                }
                break;
            }

            for (int in = 0; in < nnodes; ++in) {
                const index_t row = el[in];
                for (int jn = 0; jn < nnodes; ++jn) A.val[A.find(row, el[jn])] += Ae[in][jn];
                rhs[row] += be[in];
            }
        }
    }
}

inline AssemblyResult assemble_naive(const Mesh& mesh, const KernelSpec& kernel)
{
    AssemblyResult r{sparsity_pattern(mesh), std::vector<double>(mesh.node_count(), 0.0)};
    assemble_naive_into(mesh, kernel, r.matrix, r.rhs);
    return r;
}

// ---------------------------------------------------------------------------
// Packed assembly
// ---------------------------------------------------------------------------

/// Elemental matrices/vectors of one pack, slot index innermost.
struct ElementBatch {
    int width = 0;
    int nnodes = 0;
    std::vector<double> Ae; // [nnodes][nnodes][width]
    std::vector<double> be; // [nnodes][width]

    double matrix(int slot, int in, int jn) const noexcept
    {
        return Ae[(static_cast<std::size_t>(in) * nnodes + jn) * width + slot];
    }
    double vector(int slot, int in) const noexcept { return be[static_cast<std::size_t>(in) * width + slot]; }
};

namespace detail {

// Per-pack scratch; every array keeps the pack dimension innermost so the
// lane loops below have a constant trip count W and unit stride.
template <int W>
struct PackWorkspace {
    alignas(64) double x[3][kMaxNodes][W];
    alignas(64) double coef[3][kMaxNodes][W];
    alignas(64) double detw[kMaxGauss][W];
    alignas(64) double grad[kMaxGauss][3][kMaxNodes][W];
    alignas(64) double Ae[kMaxNodes][kMaxNodes][W];
    alignas(64) double be[kMaxNodes][W];
    alignas(64) double tmp[3][W];
    bool pad[W];
};

template <int W>
void gather_lanes(double (&dst)[kMaxNodes][W], const PackSet& ps, std::size_t pack, int nnodes, std::size_t real,
                  auto&& value, double pad_fill)
{
    for (int in = 0; in < nnodes; ++in) {
        for (std::size_t s = 0; s < real; ++s) dst[in][s] = value(ps.node(pack, static_cast<int>(s), in));
        for (std::size_t s = real; s < static_cast<std::size_t>(W); ++s) dst[in][s] = pad_fill;
    }
}

/// Geometry and elemental kernel of one pack into ws.Ae / ws.be.
template <int W>
void evaluate_pack(const Mesh& mesh, const PackSet& ps, std::size_t pack, const KernelSpec& kernel, PackWorkspace<W>& ws,
                   double pad_fill)
{
    const PackGroup& grp = ps.group_of(pack);
    const ShapeTable& t = shape_table(grp.shape);
    const int nnodes = t.nnodes, ngauss = t.ngauss;
    const std::size_t real = ps.real_slots(pack);

    for (int w = 0; w < W; ++w) ws.pad[w] = static_cast<std::size_t>(w) >= real;
    for (int c = 0; c < 3; ++c)
        gather_lanes<W>(ws.x[c], ps, pack, nnodes, real, [&](index_t v) { return mesh.nodes[v][c]; }, pad_fill);

    // Geometry at every Gauss point.
    for (int ig = 0; ig < ngauss; ++ig) {
        alignas(64) double J[3][3][W];
        for (int d = 0; d < 3; ++d)
            for (int e = 0; e < 3; ++e) {
                double* acc = J[d][e];
                for (int w = 0; w < W; ++w) acc[w] = 0.0;
                for (int in = 0; in < nnodes; ++in) {
                    const double dn = t.dN[d][in][ig];
                    for (int w = 0; w < W; ++w) acc[w] += dn * ws.x[e][in][w];
                }
            }
        bool bad = false;
        for (int w = 0; w < W; ++w) {
            const double det = J[0][0][w] * (J[1][1][w] * J[2][2][w] - J[1][2][w] * J[2][1][w])
                             - J[0][1][w] * (J[1][0][w] * J[2][2][w] - J[1][2][w] * J[2][0][w])
                             + J[0][2][w] * (J[1][0][w] * J[2][1][w] - J[1][1][w] * J[2][0][w]);
            bad |= !ws.pad[w] && !(det > 0.0 && std::abs(det) >= 1e-300);
            ws.tmp[0][w] = det;
        }
        if (bad) {
            for (std::size_t s = 0; s < real; ++s) {
                const double det = ws.tmp[0][s];
                const auto id = ps.slots(pack)[s];
                if (!(std::abs(det) >= 1e-300)) throw GeometryError(id, "singular Jacobian");
                if (!(det > 0.0)) throw GeometryError(id, "inverted element");
            }
        }
        const double wq = t.w[ig];
        for (int w = 0; w < W; ++w) {
            const double det = ws.tmp[0][w];
            // Padding lanes divide by a unit placeholder and keep detw = det * w (zero for zero-filled coordinates).
            const double inv = 1.0 / (ws.pad[w] ? 1.0 : det);
            double Ji[3][3];
            Ji[0][0] = (J[1][1][w] * J[2][2][w] - J[1][2][w] * J[2][1][w]) * inv;
            Ji[0][1] = (J[0][2][w] * J[2][1][w] - J[0][1][w] * J[2][2][w]) * inv;
            Ji[0][2] = (J[0][1][w] * J[1][2][w] - J[0][2][w] * J[1][1][w]) * inv;
            Ji[1][0] = (J[1][2][w] * J[2][0][w] - J[1][0][w] * J[2][2][w]) * inv;
            Ji[1][1] = (J[0][0][w] * J[2][2][w] - J[0][2][w] * J[2][0][w]) * inv;
            Ji[1][2] = (J[0][2][w] * J[1][0][w] - J[0][0][w] * J[1][2][w]) * inv;
            Ji[2][0] = (J[1][0][w] * J[2][1][w] - J[1][1][w] * J[2][0][w]) * inv;
            Ji[2][1] = (J[0][1][w] * J[2][0][w] - J[0][0][w] * J[2][1][w]) * inv;
            Ji[2][2] = (J[0][0][w] * J[1][1][w] - J[0][1][w] * J[1][0][w]) * inv;
            ws.detw[ig][w] = det * wq;
            for (int in = 0; in < nnodes; ++in)
                for (int e = 0; e < 3; ++e)
                    ws.grad[ig][e][in][w] = Ji[e][0] * t.dN[0][in][ig] + Ji[e][1] * t.dN[1][in][ig] + Ji[e][2] * t.dN[2][in][ig];
        }
    }

    for (int in = 0; in < nnodes; ++in) {
        for (int jn = 0; jn < nnodes; ++jn)
            for (int w = 0; w < W; ++w) ws.Ae[in][jn][w] = 0.0;
        for (int w = 0; w < W; ++w) ws.be[in][w] = 0.0;
    }

    switch (kernel.kind) {
    case KernelKind::Mass:
        for (int ig = 0; ig < ngauss; ++ig)
            for (int jn = 0; jn < nnodes; ++jn)
                for (int in = 0; in < nnodes; ++in) {
                    const double ni = t.N[in][ig], nj = t.N[jn][ig];
                    double* __restrict ae = ws.Ae[in][jn];
                    const double* __restrict jac = ws.detw[ig];
                    for (int w = 0; w < W; ++w) ae[w] = ae[w] + jac[w] * ni * nj;
                }
        break;
    case KernelKind::Diffusion: {
        const double kappa = kernel.diffusivity;
        for (int ig = 0; ig < ngauss; ++ig)
            for (int jn = 0; jn < nnodes; ++jn)
                for (int in = 0; in < nnodes; ++in) {
                    double* __restrict ae = ws.Ae[in][jn];
                    const double* __restrict jac = ws.detw[ig];
                    const double* __restrict gxi = ws.grad[ig][0][in];
                    const double* __restrict gyi = ws.grad[ig][1][in];
                    const double* __restrict gzi = ws.grad[ig][2][in];
                    const double* __restrict gxj = ws.grad[ig][0][jn];
                    const double* __restrict gyj = ws.grad[ig][1][jn];
                    const double* __restrict gzj = ws.grad[ig][2][jn];
                    for (int w = 0; w < W; ++w)
                        ae[w] = ae[w] + jac[w] * kappa * (gxi[w] * gxj[w] + gyi[w] * gyj[w] + gzi[w] * gzj[w]);
                }
        break;
    }
    case KernelKind::Convection: {
        for (int c = 0; c < 3; ++c)
            gather_lanes<W>(ws.coef[c], ps, pack, nnodes, real, [&](index_t v) { return kernel.velocity[v][c]; }, pad_fill);
        for (int ig = 0; ig < ngauss; ++ig) {
            for (int c = 0; c < 3; ++c) {
                double* __restrict u = ws.tmp[c];
                for (int w = 0; w < W; ++w) u[w] = 0.0;
                for (int kn = 0; kn < nnodes; ++kn) {
                    const double n = t.N[kn][ig];
                    for (int w = 0; w < W; ++w) u[w] += n * ws.coef[c][kn][w];
                }
            }
            for (int jn = 0; jn < nnodes; ++jn) {
                alignas(64) double adv[W];
                for (int w = 0; w < W; ++w)
                    adv[w] = ws.tmp[0][w] * ws.grad[ig][0][jn][w] + ws.tmp[1][w] * ws.grad[ig][1][jn][w] + ws.tmp[2][w] * ws.grad[ig][2][jn][w];
                for (int in = 0; in < nnodes; ++in) {
                    const double ni = t.N[in][ig];
                    double* __restrict ae = ws.Ae[in][jn];
                    const double* __restrict jac = ws.detw[ig];
                    for (int w = 0; w < W; ++w) ae[w] = ae[w] + jac[w] * ni * adv[w];
                }
            }
        }
        break;
    }
    case KernelKind::SourceRhs: {
        gather_lanes<W>(ws.coef[0], ps, pack, nnodes, real, [&](index_t v) { return kernel.source[v]; }, pad_fill);
        for (int ig = 0; ig < ngauss; ++ig) {
            double* __restrict s = ws.tmp[0];
            for (int w = 0; w < W; ++w) s[w] = 0.0;
            for (int kn = 0; kn < nnodes; ++kn) {
                const double n = t.N[kn][ig];
                for (int w = 0; w < W; ++w) s[w] += n * ws.coef[0][kn][w];
            }
            for (int in = 0; in < nnodes; ++in) {
                const double ni = t.N[in][ig];
                double* __restrict b = ws.be[in];
                const double* __restrict jac = ws.detw[ig];
                for (int w = 0; w < W; ++w) b[w] = b[w] + jac[w] * ni * s[w];
            }
        }
        break;
    }
    }
}

// Scatter of real slots only, slot by slot (element order).
template <int W>
void scatter_pack(const PackSet& ps, std::size_t pack, const PackWorkspace<W>& ws, bool has_matrix, const SparseMatrix& pattern,
                  std::span<double> values, std::span<double> rhs)
{
    const int nnodes = ps.group_of(pack).nnodes;
    const std::size_t real = ps.real_slots(pack);
    for (std::size_t s = 0; s < real; ++s)
        for (int in = 0; in < nnodes; ++in) {
            const index_t row = ps.node(pack, static_cast<int>(s), in);
            if (has_matrix)
                for (int jn = 0; jn < nnodes; ++jn) values[pattern.find(row, ps.node(pack, static_cast<int>(s), jn))] += ws.Ae[in][jn][s];
            rhs[row] += ws.be[in][s];
        }
}

template <int W>
void assemble_packed_range(const Mesh& mesh, const PackSet& ps, const KernelSpec& kernel, std::size_t first, std::size_t last,
                           const SparseMatrix& pattern, std::span<double> values, std::span<double> rhs, double pad_fill)
{
    auto ws = std::make_unique<PackWorkspace<W>>();
    const bool has_matrix = kernel.kind != KernelKind::SourceRhs;
    for (std::size_t p = first; p < last; ++p) {
        evaluate_pack<W>(mesh, ps, p, kernel, *ws, pad_fill);
        scatter_pack<W>(ps, p, *ws, has_matrix, pattern, values, rhs);
    }
}

template <int W>
void assemble_packed_impl(const Mesh& mesh, const PackSet& ps, const KernelSpec& kernel, SparseMatrix& A, std::span<double> rhs,
                          const AssemblyOptions& opt)
{
    const std::size_t npacks = ps.pack_count();
    unsigned nthreads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    if (!opt.parallel || nthreads <= 1 || npacks < 2) {
        assemble_packed_range<W>(mesh, ps, kernel, 0, npacks, A, A.val, rhs, opt.pad_fill);
        return;
    }
    nthreads = static_cast<unsigned>(std::min<std::size_t>(nthreads, npacks));
    // Thread-private values merged by summation in thread order.
    std::vector<std::vector<double>> vals(nthreads, std::vector<double>(A.val.size(), 0.0));
    std::vector<std::vector<double>> rhss(nthreads, std::vector<double>(rhs.size(), 0.0));
    std::vector<std::exception_ptr> errors(nthreads);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < nthreads; ++t) {
            const std::size_t first = npacks * t / nthreads, last = npacks * (t + 1) / nthreads;
            pool.emplace_back([&, t, first, last] {
                try {
                    assemble_packed_range<W>(mesh, ps, kernel, first, last, A, vals[t], rhss[t], opt.pad_fill);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (unsigned t = 0; t < nthreads; ++t) {
        for (std::size_t k = 0; k < A.val.size(); ++k) A.val[k] += vals[t][k];
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += rhss[t][i];
    }
}

template <int W>
ElementBatch evaluate_batch(const Mesh& mesh, const PackSet& ps, std::size_t pack, const KernelSpec& kernel, double pad_fill)
{
    auto ws = std::make_unique<PackWorkspace<W>>();
    evaluate_pack<W>(mesh, ps, pack, kernel, *ws, pad_fill);
    const int nn = ps.group_of(pack).nnodes;
    ElementBatch b{W, nn, std::vector<double>(static_cast<std::size_t>(nn) * nn * W), std::vector<double>(static_cast<std::size_t>(nn) * W)};
    for (int in = 0; in < nn; ++in) {
        for (int jn = 0; jn < nn; ++jn)
            for (int w = 0; w < W; ++w) b.Ae[(static_cast<std::size_t>(in) * nn + jn) * W + w] = ws->Ae[in][jn][w];
        for (int w = 0; w < W; ++w) b.be[static_cast<std::size_t>(in) * W + w] = ws->be[in][w];
    }
    return b;
}

/// Calls f.template operator()<W>() for the compiled instance matching `width`.
template <class F>
decltype(auto) dispatch_width(int width, F&& f)
{
    switch (width) {
    case 1: return f.template operator()<1>();
    case 2: return f.template operator()<2>();
    case 4: return f.template operator()<4>();
    case 8: return f.template operator()<8>();
    case 16: return f.template operator()<16>();
    case 32: return f.template operator()<32>();
    case 64: return f.template operator()<64>();
    case 128: return f.template operator()<128>();
    case 256: return f.template operator()<256>();
    case 512: return f.template operator()<512>();
    default: throw Error("unsupported pack width " + std::to_string(width) + " (supported: 1,2,4,8,16,32,64,128,256,512)");
    }
}

inline void check_packset(const Mesh& mesh, const PackSet& ps)
{
    std::array<std::size_t, 4> census{};
    for (const auto& b : mesh.blocks) census[shape_index(b.shape)] += b.size();
    if (census != ps.census() || mesh.node_count() != ps.node_count() || ps.element_count() != mesh.element_count())
        throw Error("packset/mesh mismatch: element census differs");
}

} // namespace detail

/// Evaluates one pack's elemental matrices without scattering.
inline ElementBatch evaluate_batch(const Mesh& mesh, const PackSet& ps, std::size_t pack, const KernelSpec& kernel,
                                   double pad_fill = 0.0)
{
    detail::check_packset(mesh, ps);
    kernel.check(mesh.node_count());
    return detail::dispatch_width(ps.width(), [&]<int W>() { return detail::evaluate_batch<W>(mesh, ps, pack, kernel, pad_fill); });
}

/// Adds the packed-order contributions to A and rhs. A must carry the mesh's pattern.
inline void assemble_packed_into(const Mesh& mesh, const PackSet& ps, const KernelSpec& kernel, SparseMatrix& A,
                                 std::span<double> rhs, const AssemblyOptions& opt = {})
{
    detail::check_packset(mesh, ps);
    kernel.check(mesh.node_count());
    detail::dispatch_width(ps.width(), [&]<int W>() { detail::assemble_packed_impl<W>(mesh, ps, kernel, A, rhs, opt); });
}

inline AssemblyResult assemble_packed(const Mesh& mesh, const PackSet& ps, const KernelSpec& kernel, const AssemblyOptions& opt = {})
{
    AssemblyResult r{sparsity_pattern(mesh), std::vector<double>(mesh.node_count(), 0.0)};
    assemble_packed_into(mesh, ps, kernel, r.matrix, r.rhs, opt);
    return r;
}

} // namespace packfem

#pragma once

#include "packfem/assembly.hpp"
#include "packfem/counters.hpp"
#include "packfem/mesh_io.hpp"
#include "packfem/packing.hpp"
#include "packfem/solver.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace packfem {

enum class PhaseTag { Nastin, Temper, Chemic, Solver };

inline constexpr std::array<PhaseTag, 4> kAllPhases{PhaseTag::Nastin, PhaseTag::Temper, PhaseTag::Chemic, PhaseTag::Solver};

constexpr std::string_view phase_name(PhaseTag t) noexcept
{
    switch (t) {
    case PhaseTag::Nastin: return "nastin";
    case PhaseTag::Temper: return "temper";
    case PhaseTag::Chemic: return "chemic";
    case PhaseTag::Solver: return "solver";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

/// Monotonic time source in seconds.
class Timer {
public:
    virtual ~Timer() = default;
    virtual double now() = 0;
};

template <class Clock>
class ClockTimer final : public Timer {
    static_assert(Clock::is_steady, "phase timing requires a monotonic clock");

public:
    double now() override { return std::chrono::duration<double>(Clock::now().time_since_epoch()).count(); }
};

using SteadyTimer = ClockTimer<std::chrono::steady_clock>;

/// One tagged region of one step.
struct PhaseRecord {
    PhaseTag tag{};
    std::size_t step = 0;
    double seconds = 0.0;
    int assembly_spans = 0; // RK stage sweeps inside the region
    int assembly_calls = 0; // kernel assemblies inside the region
    int solver_calls = 0;
    CounterSet counters;
};

struct Instrumentation {
    Timer* timer = nullptr;            // steady clock when null
    CounterSampler* counters = nullptr; // none when null
    std::vector<PhaseRecord>* sink = nullptr;
};

// ---------------------------------------------------------------------------
// Physics stand-in
// ---------------------------------------------------------------------------

struct PhysicsParams {
    double velocity_amplitude = 1.0;
    double viscosity = 1e-2;
    double kappa_temper = 1e-2;
    double kappa_c = 1e-2;
    double kappa_cvar = 5e-3;
    double cvar_production = 1.0;
    double poisson_tol = 1e-8;
    std::size_t poisson_maxit = 0; // 0: 3 * node count
    double dt_max = 1.0;
};

/// Nodal fields; scalars stand in for enthalpy, progress variable and its variance.
struct SimulationState {
    std::vector<double> temper, c, cvar, p;
    std::vector<Vec3> u;
    double t = 0.0;
    std::size_t step = 0;

    bool operator==(const SimulationState&) const = default;
};

/// Divergence-free Taylor-Green-like vortex on the unit cube, tangential on the x and y faces.
inline Vec3 taylor_green(const Vec3& x, double amplitude)
{
    using std::numbers::pi;
    return {amplitude * std::sin(pi * x[0]) * std::cos(pi * x[1]), -amplitude * std::cos(pi * x[0]) * std::sin(pi * x[1]), 0.0};
}

/// Owns the preprocessed mesh, packs, work matrices and the lumped mass.
class Simulation {
public:
    Simulation(Preprocessed pp, PhysicsParams params = {}, AssemblyOptions opt = {})
        : pp_(std::move(pp)), params_(params), opt_(opt)
    {
        const auto& m = pp_.mesh;
        pattern_ = sparsity_pattern(m);
        conv_ = lap_ = lap2_ = pattern_;
        auto mass = pattern_;
        std::vector<double> dummy(m.node_count(), 0.0);
        assemble_packed_into(m, pp_.packs, KernelSpec::mass(), mass, dummy, opt_);
        lumped_.assign(m.node_count(), 0.0);
        for (std::size_t i = 0; i < m.node_count(); ++i)
            for (std::size_t k = mass.row_ptr[i]; k < mass.row_ptr[i + 1]; ++k) lumped_[i] += mass.val[k];
        dirichlet_ = boundary_nodes(m);
    }

    const Mesh& mesh() const noexcept { return pp_.mesh; }
    const PackSet& packs() const noexcept { return pp_.packs; }
    const Preprocessed& preprocessed() const noexcept { return pp_; }
    const PhysicsParams& params() const noexcept { return params_; }
    std::span<const double> lumped_mass() const noexcept { return lumped_; }
    void set_instrumentation(Instrumentation ins) noexcept { ins_ = ins; }

    /// Default initial condition: Taylor-Green velocity, Gaussian temperature bump,
    /// tanh front in c, zero variance and pressure.
    SimulationState initial_state() const
    {
        const auto& m = pp_.mesh;
        SimulationState s;
        const std::size_t n = m.node_count();
        s.temper.resize(n);
        s.c.resize(n);
        s.cvar.assign(n, 0.0);
        s.p.assign(n, 0.0);
        s.u.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& x = m.nodes[i];
            const double r2 = (x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.5) * (x[1] - 0.5) + (x[2] - 0.5) * (x[2] - 0.5);
            s.temper[i] = std::exp(-r2 / (2.0 * 0.15 * 0.15));
            s.c[i] = 0.5 * (1.0 + std::tanh((x[2] - 0.5) / 0.1));
            s.u[i] = taylor_green(x, params_.velocity_amplitude);
        }
        return s;
    }

    /// One SSP-RK3 step of all three phases plus the Poisson solve.
    void step(SimulationState& s, double dt)
    {
        if (!(dt > 0.0)) throw Error("rk3_step: dt must be positive");
        if (dt > params_.dt_max) throw Error("rk3_step: dt exceeds dt_max");
        nastin(s, dt);
        solver(s);
        temper(s, dt);
        chemic(s, dt);
        s.t += dt;
        ++s.step;
    }

private:
    // SSP-RK3 (Shu-Osher) over a set of nodal arrays; `rate(stage, fields, out)`
    // fills out = dy/dt at the given fields.
    template <class Rate>
    void ssp_rk3(std::vector<std::vector<double>*> y, double dt, PhaseTag tag, Rate&& rate)
    {
        const std::size_t nf = y.size(), n = pp_.mesh.node_count();
        std::vector<std::vector<double>> y0(nf), stage(nf), k(nf, std::vector<double>(n));
        for (std::size_t f = 0; f < nf; ++f) y0[f] = stage[f] = *y[f];
        constexpr double a[3] = {0.0, 0.75, 1.0 / 3.0};
        constexpr double b[3] = {1.0, 0.25, 2.0 / 3.0};
        for (int st = 0; st < 3; ++st) {
            rate(st, stage, k);
            for (std::size_t f = 0; f < nf; ++f)
                for (std::size_t i = 0; i < n; ++i) stage[f][i] = a[st] * y0[f][i] + b[st] * (stage[f][i] + dt * k[f][i]);
            for (std::size_t f = 0; f < nf; ++f)
                for (double v : stage[f])
                    if (!std::isfinite(v))
                        throw Error("non-finite value in " + std::string(phase_name(tag)) + " stage " + std::to_string(st + 1));
        }
        for (std::size_t f = 0; f < nf; ++f) *y[f] = std::move(stage[f]);
    }

    void assemble(const KernelSpec& k, SparseMatrix& A, std::span<double> rhs)
    {
        assemble_packed_into(pp_.mesh, pp_.packs, k, A, rhs, opt_);
        ++current_.assembly_calls;
    }

    // out = M_L^{-1} (b - (C + K) y)
    void apply_rate(std::span<const double> y, const SparseMatrix& C, const SparseMatrix& K, std::span<const double> b,
                    std::span<double> out)
    {
        const std::size_t n = y.size();
        std::vector<double> cy(n), ky(n);
        spmv(C, y, cy);
        spmv(K, y, ky);
        for (std::size_t i = 0; i < n; ++i) out[i] = ((b.empty() ? 0.0 : b[i]) - cy[i] - ky[i]) / lumped_[i];
    }

    void begin(PhaseTag tag, const SimulationState& s)
    {
        current_ = PhaseRecord{tag, s.step, 0.0, 0, 0, 0, {}};
        if (ins_.counters) ins_.counters->start();
        t0_ = now();
    }

    void end()
    {
        current_.seconds = now() - t0_;
        if (ins_.counters) current_.counters = ins_.counters->stop();
        if (ins_.sink) ins_.sink->push_back(current_);
    }

    double now()
    {
        if (ins_.timer) return ins_.timer->now();
        return steady_.now();
    }

    void nastin(SimulationState& s, double dt)
    {
        begin(PhaseTag::Nastin, s);
        const std::size_t n = pp_.mesh.node_count();
        std::vector<std::vector<double>> comp(3, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c) comp[c][i] = s.u[i][c];
        std::vector<Vec3> adv(n);
        std::vector<double> zero(n, 0.0);
        poisson_rhs_.assign(n, 0.0);
        ssp_rk3({&comp[0], &comp[1], &comp[2]}, dt, PhaseTag::Nastin, [&](int st, const auto& y, auto& k) {
            for (std::size_t i = 0; i < n; ++i) adv[i] = {y[0][i], y[1][i], y[2][i]};
            conv_.zero();
            lap_.zero();
            assemble(KernelSpec::convection(adv), conv_, zero);
            assemble(KernelSpec::diffusion(params_.viscosity), lap_, zero);
            if (st == 2) {
                // Poisson right-hand side from the kinetic-energy fluctuation.
                std::vector<double> ke(n);
                double mean = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    ke[i] = 0.5 * (adv[i][0] * adv[i][0] + adv[i][1] * adv[i][1] + adv[i][2] * adv[i][2]);
                    mean += ke[i];
                }
                mean /= double(n);
                for (auto& v : ke) v -= mean;
                assemble(KernelSpec::source_rhs(ke), lap2_, poisson_rhs_);
            }
            ++current_.assembly_spans;
            for (int c = 0; c < 3; ++c) apply_rate(y[c], conv_, lap_, {}, k[c]);
        });
        for (std::size_t i = 0; i < n; ++i) s.u[i] = {comp[0][i], comp[1][i], comp[2][i]};
        end();
    }

    void solver(SimulationState& s)
    {
        begin(PhaseTag::Solver, s);
        auto A = lap_;
        auto b = poisson_rhs_;
        const std::vector<double> zeros(dirichlet_.size(), 0.0);
        apply_dirichlet(A, b, dirichlet_, zeros);
        const std::size_t maxit = params_.poisson_maxit ? params_.poisson_maxit : 3 * A.n;
        last_solve_ = cg_solve(A, b, params_.poisson_tol, maxit, Preconditioner::Jacobi);
        ++current_.solver_calls;
        s.p = last_solve_.x;
        end();
    }

    void temper(SimulationState& s, double dt)
    {
        begin(PhaseTag::Temper, s);
        std::vector<double> zero(s.temper.size(), 0.0);
        ssp_rk3({&s.temper}, dt, PhaseTag::Temper, [&](int, const auto& y, auto& k) {
            conv_.zero();
            lap_.zero();
            assemble(KernelSpec::convection(s.u), conv_, zero);
            assemble(KernelSpec::diffusion(params_.kappa_temper), lap_, zero);
            ++current_.assembly_spans;
            apply_rate(y[0], conv_, lap_, {}, k[0]);
        });
        end();
    }

    void chemic(SimulationState& s, double dt)
    {
        begin(PhaseTag::Chemic, s);
        const std::size_t n = s.c.size();
        std::vector<double> zero(n, 0.0), src(n), b(n);
        ssp_rk3({&s.c, &s.cvar}, dt, PhaseTag::Chemic, [&](int, const auto& y, auto& k) {
            conv_.zero();
            lap_.zero();
            lap2_.zero();
            std::fill(b.begin(), b.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) src[i] = params_.cvar_production * y[0][i] * (1.0 - y[0][i]);
            assemble(KernelSpec::convection(s.u), conv_, zero);
            assemble(KernelSpec::diffusion(params_.kappa_c), lap_, zero);
            assemble(KernelSpec::diffusion(params_.kappa_cvar), lap2_, zero);
            assemble(KernelSpec::source_rhs(src), lap2_, b);
            ++current_.assembly_spans;
            apply_rate(y[0], conv_, lap_, {}, k[0]);
            apply_rate(y[1], conv_, lap2_, b, k[1]);
        });
        end();
    }

public:
    const SolveResult& last_solve() const noexcept { return last_solve_; }

private:
    Preprocessed pp_;
    PhysicsParams params_;
    AssemblyOptions opt_;
    SparseMatrix pattern_, conv_, lap_, lap2_;
    std::vector<double> lumped_, poisson_rhs_;
    std::vector<index_t> dirichlet_;
    Instrumentation ins_;
    SteadyTimer steady_;
    PhaseRecord current_;
    double t0_ = 0.0;
    SolveResult last_solve_;
};

/// Advances `state` by one step; phases are recorded through the simulation's instrumentation.
inline SimulationState rk3_step(Simulation& sim, SimulationState state, double dt)
{
    sim.step(state, dt);
    return state;
}

// ---------------------------------------------------------------------------
// Whole run
// ---------------------------------------------------------------------------

struct RunConfig {
    std::shared_ptr<const Mesh> mesh;
    int width = 1;
    std::size_t steps = 5;
    double dt = 1e-3;
    bool parallel = false;
    unsigned threads = 0;
    Renumbering renumbering = Renumbering::CuthillMcKee;
    PhysicsParams physics;
    std::string output_path; // field output, empty for none
};

struct RunResult {
    SimulationState state;
    std::vector<PhaseRecord> records;
    double preprocess_seconds = 0.0;
    double postprocess_seconds = 0.0;
    std::size_t bandwidth_before = 0;
    std::size_t bandwidth_after = 0;
};

/// Preprocess (grouping, renumbering, packing), `steps` time steps, postprocess.
inline RunResult run(const RunConfig& cfg, Timer* timer = nullptr, CounterSampler* counters = nullptr)
{
    if (!cfg.mesh) throw Error("run: no mesh");
    SteadyTimer steady;
    Timer& clock = timer ? *timer : steady;
    RunResult res;

    const double t0 = clock.now();
    Simulation sim(preprocess(*cfg.mesh, cfg.width, cfg.renumbering), cfg.physics, AssemblyOptions{cfg.parallel, cfg.threads, 0.0});
    res.preprocess_seconds = clock.now() - t0;
    res.bandwidth_before = sim.preprocessed().bandwidth_before;
    res.bandwidth_after = sim.preprocessed().bandwidth_after;
    sim.set_instrumentation({&clock, counters, &res.records});

    SimulationState s = sim.initial_state();
    for (std::size_t k = 0; k < cfg.steps; ++k) sim.step(s, cfg.dt);

    const double t1 = clock.now();
    // Back to the input node numbering.
    const auto& fwd = sim.preprocessed().node_order.forward;
    SimulationState out = s;
    for (std::size_t old = 0; old < fwd.size(); ++old) {
        out.temper[old] = s.temper[fwd[old]];
        out.c[old] = s.c[fwd[old]];
        out.cvar[old] = s.cvar[fwd[old]];
        out.p[old] = s.p[fwd[old]];
        out.u[old] = s.u[fwd[old]];
    }
    if (!cfg.output_path.empty()) {
        std::vector<NamedField> fields{{"temper", out.temper}, {"c", out.c}, {"cvar", out.cvar}, {"p", out.p}};
        for (int c = 0; c < 3; ++c) {
            NamedField f{std::string("u") + "xyz"[c], std::vector<double>(out.u.size())};
            for (std::size_t i = 0; i < out.u.size(); ++i) f.values[i] = out.u[i][c];
            fields.push_back(std::move(f));
        }
        write_mesh(*cfg.mesh, cfg.output_path, fields);
    }
    res.postprocess_seconds = clock.now() - t1;
    res.state = std::move(out);
    return res;
}

} // namespace packfem

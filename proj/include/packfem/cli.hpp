#pragma once

#include "packfem/bench.hpp"
#include "packfem/mesh_io.hpp"

#include "CLI11.hpp"

#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

namespace packfem::cli {

enum class Command { MeshGen, MeshCheck, Pack, Assemble, Solve, Run, Bench };

struct Config {
    Command command{};
    std::string mesh_path;
    std::string output;
    int width = 1;
    std::vector<int> widths{kSupportedWidths.begin(), kSupportedWidths.end()};
    std::size_t steps = 5;
    std::size_t warmup = 1;
    double dt = 1e-3;
    double tolerance = 1e-10;
    bool parallel = false;
    bool counters = false;
    bool isolate = true;
    bool report = false;
    bool check_naive = false;
    KernelKind kernel = KernelKind::Mass;
    ReportFormat format = ReportFormat::Csv;
    std::size_t nx = 4, ny = 4, nz = 4;
    MixPolicy mix = MixPolicy::Mixed;
};

/// Parsing stopped: `code` 0 for --help, 2 for usage errors; `text` is what to print.
struct UsageError : std::runtime_error {
    UsageError(int code, std::string text) : std::runtime_error(std::move(text)), code(code) {}
    int code;
};

namespace detail {

inline std::string width_check(const std::string& s)
{
    int w = 0;
    try {
        std::size_t used = 0;
        w = std::stoi(s, &used);
        if (used != s.size()) w = 0;
    } catch (const std::exception&) {
        w = 0;
    }
    if (is_supported_width(w)) return {};
    return "unsupported pack width " + s + " (supported: 1,2,4,8,16,32,64,128,256,512)";
}

} // namespace detail

inline Config parse_args(int argc, const char* const* argv)
{
    Config cfg;
    CLI::App app{"Packed finite-element assembly mini-app", "packfem"};
    app.set_help_all_flag("--help-all", "Expand all subcommand help");
    const CLI::Validator width_ok(detail::width_check, "WIDTH");

    auto* mesh = app.add_subcommand("mesh", "Generate or check meshes");
    mesh->require_subcommand(1);
    auto* gen = mesh->add_subcommand("gen", "Generate a structured box mesh on the unit cube");
    gen->add_option("--nx", cfg.nx, "Cells in x")->check(CLI::PositiveNumber);
    gen->add_option("--ny", cfg.ny, "Cells in y")->check(CLI::PositiveNumber);
    gen->add_option("--nz", cfg.nz, "Cells in z")->check(CLI::PositiveNumber);
    gen->add_option("--mix", cfg.mix, "Element mix")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, MixPolicy>{{"tet", MixPolicy::AllTet}, {"hex", MixPolicy::AllHex}, {"mixed", MixPolicy::Mixed}}));
    gen->add_option("-o,--output", cfg.output, "Output mesh file")->required();
    auto* check = mesh->add_subcommand("check", "Validate a mesh file");
    check->add_option("file", cfg.mesh_path, "Mesh file")->required();

    auto* pack = app.add_subcommand("pack", "Group, renumber and pack a mesh");
    pack->add_option("file", cfg.mesh_path, "Mesh file")->required();
    pack->add_option("-W,--width", cfg.width, "Pack width")->check(width_ok);
    pack->add_flag("--report", cfg.report, "Print per-group pack details");

    auto* assemble = app.add_subcommand("assemble", "Assemble one kernel with the packed layout");
    assemble->add_option("file", cfg.mesh_path, "Mesh file")->required();
    assemble->add_option("-W,--width", cfg.width, "Pack width")->check(width_ok);
    assemble->add_option("--kernel", cfg.kernel, "Kernel")
        ->transform(CLI::CheckedTransformer(std::map<std::string, KernelKind>{{"mass", KernelKind::Mass},
                                                                               {"diffusion", KernelKind::Diffusion},
                                                                               {"convection", KernelKind::Convection},
                                                                               {"source", KernelKind::SourceRhs}}));
    assemble->add_flag("--check-against-naive", cfg.check_naive, "Compare with the element-by-element assembly");

    auto* solve = app.add_subcommand("solve", "Assemble and solve a Poisson problem with CG");
    solve->add_option("file", cfg.mesh_path, "Mesh file")->required();
    solve->add_option("-W,--width", cfg.width, "Pack width")->check(width_ok);
    solve->add_option("--tol", cfg.tolerance, "Relative residual target")->check(CLI::PositiveNumber);

    auto* run = app.add_subcommand("run", "Time-step the three-phase proxy");
    run->add_option("--mesh", cfg.mesh_path, "Mesh file")->required();
    run->add_option("-W,--width", cfg.width, "Pack width")->check(width_ok);
    run->add_option("--steps", cfg.steps, "Time steps")->check(CLI::NonNegativeNumber);
    run->add_option("--dt", cfg.dt, "Time step")->check(CLI::PositiveNumber);
    run->add_flag("--parallel", cfg.parallel, "Assemble packs on several threads");
    run->add_option("-o,--output", cfg.output, "Write final fields (mesh format with field blocks)");

    auto* bench = app.add_subcommand("bench", "Sweep pack widths and report per-phase timings");
    bench->add_option("--mesh", cfg.mesh_path, "Mesh file")->required();
    bench->add_option("--widths", cfg.widths, "Comma separated pack widths")->delimiter(',')->check(width_ok);
    bench->add_option("--steps", cfg.steps, "Measured steps")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", cfg.warmup, "Warmup steps excluded from aggregates")->check(CLI::NonNegativeNumber);
    bench->add_option("--dt", cfg.dt, "Time step")->check(CLI::PositiveNumber);
    bench->add_flag("--counters", cfg.counters, "Sample hardware counters when available");
    bench->add_flag("--parallel", cfg.parallel, "Assemble packs on several threads");
    bench->add_flag("!--no-isolate", cfg.isolate, "Measure all widths in this process");
    bench->add_option("--format", cfg.format, "Report format")
        ->transform(CLI::CheckedTransformer(std::map<std::string, ReportFormat>{{"csv", ReportFormat::Csv}, {"md", ReportFormat::Markdown}}));
    bench->add_option("-o,--output", cfg.output, "Report file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        while (true) {
            auto subs = target->get_subcommands();
            if (subs.empty()) break;
            target = subs.front();
        }
        throw UsageError(0, target->help());
    } catch (const CLI::CallForAllHelp&) {
        throw UsageError(0, app.help("", CLI::AppFormatMode::All));
    } catch (const CLI::ParseError& e) {
        throw UsageError(2, std::string("error: ") + e.what() + "\nRun with --help for more information.\n");
    }

    if (*gen)
        cfg.command = Command::MeshGen;
    else if (*check)
        cfg.command = Command::MeshCheck;
    else if (*pack)
        cfg.command = Command::Pack;
    else if (*assemble)
        cfg.command = Command::Assemble;
    else if (*solve)
        cfg.command = Command::Solve;
    else if (*run)
        cfg.command = Command::Run;
    else if (*bench)
        cfg.command = Command::Bench;
    else
        throw UsageError(2, app.help());

    if (cfg.command == Command::MeshGen && cfg.mix == MixPolicy::Mixed && cfg.nz < 3)
        throw UsageError(2, "error: --mix mixed needs --nz >= 3\n");
    return cfg;
}

namespace detail {

inline void print_records(std::ostream& out, std::span<const PhaseRecord> records)
{
    out << "step,phase,ms,assembly_spans,solver_calls\n";
    for (const auto& r : records)
        out << r.step << ',' << phase_name(r.tag) << ',' << std::fixed << std::setprecision(6) << r.seconds * 1e3 << std::defaultfloat
            << ',' << r.assembly_spans << ',' << r.solver_calls << '\n';
}

inline KernelSpec demo_kernel(KernelKind kind, const Mesh& m, std::vector<Vec3>& u, std::vector<double>& src)
{
    switch (kind) {
    case KernelKind::Mass: return KernelSpec::mass();
    case KernelKind::Diffusion: return KernelSpec::diffusion(1.0);
    case KernelKind::Convection:
        u.resize(m.node_count());
        for (std::size_t i = 0; i < m.node_count(); ++i) u[i] = taylor_green(m.nodes[i], 1.0);
        return KernelSpec::convection(u);
    case KernelKind::SourceRhs: src.assign(m.node_count(), 1.0); return KernelSpec::source_rhs(src);
    }
    return KernelSpec::mass();
}

} // namespace detail

/// Executes a parsed command; returns the process exit code.
inline int execute(const Config& cfg, std::ostream& out, std::ostream& err)
{
    switch (cfg.command) {
    case Command::MeshGen: {
        const auto m = generate_box_mesh(cfg.nx, cfg.ny, cfg.nz, cfg.mix);
        write_mesh(m, cfg.output);
        out << "wrote " << cfg.output << ": " << m.node_count() << " nodes, " << m.element_count() << " elements\n";
        return 0;
    }
    case Command::MeshCheck: {
        const auto m = read_mesh(cfg.mesh_path);
        out << "nodes " << m.node_count() << "\n";
        for (auto s : kAllShapes) out << shape_name(s) << ' ' << m.count(s) << '\n';
        const auto defects = validate(m);
        for (const auto& d : defects) out << d.message << '\n';
        out << (defects.empty() ? "ok\n" : "invalid\n");
        return defects.empty() ? 0 : 1;
    }
    case Command::Pack: {
        const auto pp = preprocess(read_mesh(cfg.mesh_path), cfg.width);
        const auto& ps = pp.packs;
        out << "width " << ps.width() << "\npacks " << ps.pack_count() << "\npad " << ps.pad_total() << "\nbandwidth "
            << pp.bandwidth_before << " -> " << pp.bandwidth_after << '\n';
        if (cfg.report) {
            out << "shape,elements,packs,pad\n";
            for (const auto& g : ps.groups())
                out << shape_name(g.shape) << ',' << g.element_count << ',' << g.pack_count << ',' << g.pad << '\n';
        }
        return 0;
    }
    case Command::Assemble: {
        const auto pp = preprocess(read_mesh(cfg.mesh_path), cfg.width);
        std::vector<Vec3> u;
        std::vector<double> src;
        const auto k = detail::demo_kernel(cfg.kernel, pp.mesh, u, src);
        const auto r = assemble_packed(pp.mesh, pp.packs, k);
        double msum = 0.0, vsum = 0.0;
        for (double v : r.matrix.val) msum += v;
        for (double v : r.rhs) vsum += v;
        out << "kernel " << kernel_name(cfg.kernel) << "\nwidth " << cfg.width << "\nnnz " << r.matrix.nnz() << std::setprecision(17)
            << "\nmatrix_sum " << msum << "\nrhs_sum " << vsum << '\n';
        if (cfg.check_naive) {
            const auto ref = assemble_naive(pp.mesh, k);
            const double d = std::max(max_relative_difference(r.matrix, ref.matrix), max_relative_difference(r.rhs, ref.rhs));
            const bool same = r.matrix.val == ref.matrix.val && r.rhs == ref.rhs;
            out << "max_rel_diff " << d << (same ? " (bit-identical)" : "") << '\n';
            if (!(d <= 1e-12)) {
                err << "packed assembly differs from naive\n";
                return 1;
            }
        }
        return 0;
    }
    case Command::Solve: {
        const auto pp = preprocess(read_mesh(cfg.mesh_path), cfg.width);
        auto A = assemble_packed(pp.mesh, pp.packs, KernelSpec::diffusion(1.0)).matrix;
        std::vector<double> ones(pp.mesh.node_count(), 1.0);
        auto b = assemble_packed(pp.mesh, pp.packs, KernelSpec::source_rhs(ones)).rhs;
        const auto bnd = boundary_nodes(pp.mesh);
        apply_dirichlet(A, b, bnd, std::vector<double>(bnd.size(), 0.0));
        const auto res = cg_solve(A, b, cfg.tolerance, 10 * A.n + 100, Preconditioner::Jacobi);
        out << "iterations " << res.iterations << "\nresidual " << std::setprecision(6) << std::scientific
            << relative_residual(A, res.x, b) << std::defaultfloat << "\nconverged " << (res.converged ? "yes" : "no") << '\n';
        return res.converged ? 0 : 1;
    }
    case Command::Run: {
        RunConfig rc;
        rc.mesh = std::make_shared<const Mesh>(read_mesh(cfg.mesh_path));
        rc.width = cfg.width;
        rc.steps = cfg.steps;
        rc.dt = cfg.dt;
        rc.parallel = cfg.parallel;
        rc.output_path = cfg.output;
        const auto res = run(rc);
        out << "preprocess_ms " << std::fixed << std::setprecision(6) << res.preprocess_seconds * 1e3 << "\npostprocess_ms "
            << res.postprocess_seconds * 1e3 << std::defaultfloat << "\nbandwidth " << res.bandwidth_before << " -> "
            << res.bandwidth_after << '\n';
        detail::print_records(out, res.records);
        return 0;
    }
    case Command::Bench: {
        RunConfig rc;
        rc.mesh = std::make_shared<const Mesh>(read_mesh(cfg.mesh_path));
        rc.dt = cfg.dt;
        rc.parallel = cfg.parallel;
        SweepOptions opt{cfg.steps, cfg.warmup, cfg.counters, cfg.isolate, cfg.mesh_path, nullptr};
        std::string warning;
        const auto rep = sweep(cfg.widths, rc, opt, &warning);
        if (!warning.empty()) err << "warning: " << warning << '\n';
        for (const auto& r : rep.rows)
            if (!r.equivalent) err << "W=" << r.width << " INVALID: " << r.note << '\n';
        if (cfg.output.empty())
            emit_report(rep, cfg.format, out);
        else
            emit_report(rep, cfg.format, cfg.output);
        return 0;
    }
    }
    return 1;
}

/// parse_args + execute with the exit code convention 0 ok, 1 runtime failure, 2 usage.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    Config cfg;
    try {
        cfg = parse_args(argc, argv);
    } catch (const UsageError& e) {
        (e.code == 0 ? out : err) << e.what();
        return e.code;
    }
    try {
        return execute(cfg, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace packfem::cli

#pragma once

#include "packfem/timeloop.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#if defined(__linux__)
#include <sys/wait.h>
#include <unistd.h>
#endif

namespace packfem {

struct PhaseSample {
    PhaseTag tag{};
    std::size_t step = 0;
    double wall_time = 0.0; // seconds
    bool warmup = false;
    CounterSet counters;
};

struct DerivedMetrics {
    double ipc = 0.0;
    double freq = 0.0; // cycles per second
    std::optional<double> mpki_l1, mpmi_l2, mpmi_l3;
    // Fraction of retired instructions per class; absent when the event was not measured.
    std::optional<double> fp_scalar, fp_128, fp_256, fp_512, branch, load, store;
};

namespace detail {

inline std::optional<double> ratio(const CounterSet& c, Counter what, double instructions, double scale)
{
    if (!c.has(what)) return std::nullopt;
    return c.get(what) / instructions * scale;
}

} // namespace detail

/// IPC = I/C, freq = C/T, L1 misses per 1e3 and L2/L3 per 1e6 instructions, mix = count/I.
inline DerivedMetrics derive(const CounterSet& c, double seconds)
{
    if (!c.has(Counter::Cycles) || !c.has(Counter::Instructions)) throw Error("derive: sample has no cycle/instruction counts");
    const double C = c.get(Counter::Cycles), I = c.get(Counter::Instructions);
    if (C == 0.0) throw Error("derive: zero cycles (corrupt sample)");
    if (!(seconds > 0.0)) throw Error("derive: non-positive time");
    if (I == 0.0) throw Error("derive: zero instructions (corrupt sample)");
    DerivedMetrics m;
    m.ipc = I / C;
    m.freq = C / seconds;
    m.mpki_l1 = detail::ratio(c, Counter::L1Miss, I, 1e3);
    m.mpmi_l2 = detail::ratio(c, Counter::L2Miss, I, 1e6);
    m.mpmi_l3 = detail::ratio(c, Counter::L3Miss, I, 1e6);
    m.fp_scalar = detail::ratio(c, Counter::FpScalar, I, 1.0);
    m.fp_128 = detail::ratio(c, Counter::Fp128, I, 1.0);
    m.fp_256 = detail::ratio(c, Counter::Fp256, I, 1.0);
    m.fp_512 = detail::ratio(c, Counter::Fp512, I, 1.0);
    m.branch = detail::ratio(c, Counter::Branches, I, 1.0);
    m.load = detail::ratio(c, Counter::Loads, I, 1.0);
    m.store = detail::ratio(c, Counter::Stores, I, 1.0);
    return m;
}

inline DerivedMetrics derive(const PhaseSample& s) { return derive(s.counters, s.wall_time); }

/// Per phase: counters and times summed over the non-warmup samples, then derived.
inline std::map<PhaseTag, DerivedMetrics> derive(std::span<const PhaseSample> samples)
{
    std::map<PhaseTag, std::pair<CounterSet, double>> acc;
    for (const auto& s : samples) {
        if (s.warmup) continue;
        auto& [c, t] = acc[s.tag];
        c += s.counters;
        t += s.wall_time;
    }
    std::map<PhaseTag, DerivedMetrics> out;
    for (const auto& [tag, ct] : acc) out[tag] = derive(ct.first, ct.second);
    return out;
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

/// Runs warmup + steps time steps; the first `warmup` steps are flagged.
inline std::vector<PhaseSample> time_phases(RunConfig cfg, std::size_t steps, std::size_t warmup, Timer* timer = nullptr,
                                            CounterSampler* counters = nullptr)
{
    if (steps < 1) throw Error("time_phases: steps must be >= 1");
    cfg.steps = steps + warmup;
    cfg.output_path.clear();
    const auto res = run(cfg, timer, counters);
    std::vector<PhaseSample> out;
    out.reserve(res.records.size());
    for (const auto& r : res.records) out.push_back({r.tag, r.step, r.seconds, r.step < warmup, r.counters});
    return out;
}

struct PhaseAggregate {
    PhaseTag tag{};
    std::size_t steps = 0;
    double mean = 0.0, min = 0.0, max = 0.0; // seconds
    double spread = 0.0;                       // (max - min) / mean
    std::optional<DerivedMetrics> metrics;

    bool spread_flagged() const noexcept { return spread > 0.03; }
};

/// Aggregates per phase in PhaseTag order, excluding warmup samples.
inline std::vector<PhaseAggregate> aggregate(std::span<const PhaseSample> samples)
{
    std::vector<PhaseAggregate> out;
    for (auto tag : kAllPhases) {
        PhaseAggregate a;
        a.tag = tag;
        double sum = 0.0;
        bool have_counters = true;
        for (const auto& s : samples) {
            if (s.tag != tag || s.warmup) continue;
            a.min = a.steps ? std::min(a.min, s.wall_time) : s.wall_time;
            a.max = a.steps ? std::max(a.max, s.wall_time) : s.wall_time;
            sum += s.wall_time;
            ++a.steps;
            have_counters = have_counters && s.counters.has(Counter::Cycles) && s.counters.has(Counter::Instructions);
        }
        if (!a.steps) continue;
        a.mean = sum / static_cast<double>(a.steps);
        a.spread = a.mean > 0.0 ? (a.max - a.min) / a.mean : 0.0;
        if (have_counters) {
            const auto m = derive(samples);
            if (auto it = m.find(tag); it != m.end()) a.metrics = it->second;
        }
        out.push_back(a);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    int width = 0;
    bool equivalent = false;
    std::string note; // reason when not equivalent
    std::vector<PhaseAggregate> phases;
};

struct BenchReport {
    std::string mesh;
    std::string build_id;
    std::size_t steps = 0;
    std::size_t warmup = 0;
    std::string counters; // sampler description
    std::vector<SweepRow> rows;
};

inline std::string build_id()
{
    std::string s;
#if defined(__clang__)
    s = "clang " __clang_version__;
#elif defined(__GNUC__)
    s = "gcc " __VERSION__;
#else
    s = "unknown compiler";
#endif
#if defined(NDEBUG)
    s += " release";
#else
    s += " debug";
#endif
#if defined(__AVX512F__)
    s += " avx512";
#elif defined(__AVX2__)
    s += " avx2";
#endif
    return s;
}

/// Packed vs naive on the preprocessed mesh for all kernels; empty string when within tol.
inline std::string check_equivalence(const Preprocessed& pp, double tol = 1e-12)
{
    const auto& m = pp.mesh;
    std::vector<Vec3> u(m.node_count());
    std::vector<double> src(m.node_count());
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        u[i] = taylor_green(m.nodes[i], 1.0);
        src[i] = 1.0 + m.nodes[i][0] - 0.5 * m.nodes[i][1] + 0.25 * m.nodes[i][2];
    }
    const KernelSpec kernels[] = {KernelSpec::mass(), KernelSpec::diffusion(0.7), KernelSpec::convection(u), KernelSpec::source_rhs(src)};
    for (const auto& k : kernels) {
        const auto ref = assemble_naive(m, k);
        const auto got = assemble_packed(m, pp.packs, k);
        const double dm = max_relative_difference(got.matrix, ref.matrix);
        const double dv = max_relative_difference(got.rhs, ref.rhs);
        if (!(dm <= tol) || !(dv <= tol)) {
            std::ostringstream os;
            os << kernel_name(k.kind) << " differs from naive by " << std::max(dm, dv);
            return os.str();
        }
    }
    return {};
}

struct SweepOptions {
    std::size_t steps = 5;
    std::size_t warmup = 1;
    bool counters = false;
    bool isolate = true; // one child process per width where fork() is available
    std::string mesh_label;
    Timer* timer = nullptr; // steady clock when null; an isolated child uses its own copy
};

namespace detail {

inline SweepRow measure_width(const RunConfig& base, int width, const SweepOptions& opt, CounterSampler* sampler)
{
    SweepRow row;
    row.width = width;
    try {
        const auto pp = preprocess(*base.mesh, width, base.renumbering);
        row.note = check_equivalence(pp);
    } catch (const std::exception& e) {
        row.note = e.what();
    }
    row.equivalent = row.note.empty();
    RunConfig cfg = base;
    cfg.width = width;
    const auto samples = time_phases(cfg, opt.steps, opt.warmup, opt.timer, sampler);
    row.phases = aggregate(samples);
    return row;
}

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline std::optional<double> json_opt(const nlohmann::json& j)
{
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

inline nlohmann::json to_json(const SweepRow& r)
{
    nlohmann::json j{{"width", r.width}, {"equivalent", r.equivalent}, {"note", r.note}, {"phases", nlohmann::json::array()}};
    for (const auto& p : r.phases) {
        nlohmann::json pj{{"tag", static_cast<int>(p.tag)}, {"steps", p.steps}, {"mean", p.mean},
                          {"min", p.min}, {"max", p.max}, {"spread", p.spread}};
        if (p.metrics) {
            const auto& m = *p.metrics;
            pj["metrics"] = {{"ipc", m.ipc},           {"freq", m.freq},           {"mpki_l1", opt_json(m.mpki_l1)},
                             {"mpmi_l2", opt_json(m.mpmi_l2)}, {"mpmi_l3", opt_json(m.mpmi_l3)}, {"fp_scalar", opt_json(m.fp_scalar)},
                             {"fp_128", opt_json(m.fp_128)},   {"fp_256", opt_json(m.fp_256)},   {"fp_512", opt_json(m.fp_512)},
                             {"branch", opt_json(m.branch)},   {"load", opt_json(m.load)},       {"store", opt_json(m.store)}};
        }
        j["phases"].push_back(pj);
    }
    return j;
}

inline SweepRow from_json(const nlohmann::json& j)
{
    SweepRow r{j.at("width").get<int>(), j.at("equivalent").get<bool>(), j.at("note").get<std::string>(), {}};
    for (const auto& pj : j.at("phases")) {
        PhaseAggregate p{static_cast<PhaseTag>(pj.at("tag").get<int>()), pj.at("steps").get<std::size_t>(), pj.at("mean").get<double>(),
                         pj.at("min").get<double>(), pj.at("max").get<double>(), pj.at("spread").get<double>(), std::nullopt};
        if (pj.contains("metrics")) {
            const auto& mj = pj["metrics"];
            DerivedMetrics m;
            m.ipc = mj.at("ipc").get<double>();
            m.freq = mj.at("freq").get<double>();
            m.mpki_l1 = json_opt(mj.at("mpki_l1"));
            m.mpmi_l2 = json_opt(mj.at("mpmi_l2"));
            m.mpmi_l3 = json_opt(mj.at("mpmi_l3"));
            m.fp_scalar = json_opt(mj.at("fp_scalar"));
            m.fp_128 = json_opt(mj.at("fp_128"));
            m.fp_256 = json_opt(mj.at("fp_256"));
            m.fp_512 = json_opt(mj.at("fp_512"));
            m.branch = json_opt(mj.at("branch"));
            m.load = json_opt(mj.at("load"));
            m.store = json_opt(mj.at("store"));
            p.metrics = m;
        }
        r.phases.push_back(p);
    }
    return r;
}

#if defined(__linux__)
// Runs measure_width in a forked child and reads the row back as JSON.
inline SweepRow measure_width_isolated(const RunConfig& base, int width, const SweepOptions& opt)
{
    int fds[2];
    if (::pipe(fds) != 0) throw Error("sweep: pipe failed");
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        throw Error("sweep: fork failed");
    }
    if (pid == 0) {
        ::close(fds[0]);
        std::string payload;
        int code = 0;
        try {
            auto sampler = make_counter_sampler(opt.counters);
            payload = to_json(measure_width(base, width, opt, sampler.get())).dump();
        } catch (const std::exception& e) {
            payload = nlohmann::json{{"error", e.what()}}.dump();
            code = 1;
        }
        std::size_t off = 0;
        while (off < payload.size()) {
            const auto n = ::write(fds[1], payload.data() + off, payload.size() - off);
            if (n <= 0) break;
            off += static_cast<std::size_t>(n);
        }
        ::close(fds[1]);
        ::_exit(code);
    }
    ::close(fds[1]);
    std::string payload;
    char buf[4096];
    for (ssize_t n; (n = ::read(fds[0], buf, sizeof buf)) > 0;) payload.append(buf, static_cast<std::size_t>(n));
    ::close(fds[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (payload.empty()) throw Error("sweep: width " + std::to_string(width) + " child exited without a result");
    const auto j = nlohmann::json::parse(payload);
    if (j.contains("error")) throw Error(j["error"].get<std::string>());
    return from_json(j);
}
#endif

} // namespace detail

/// time_phases plus the packed/naive check for every width, sequentially.
/// An equivalence failure marks the row INVALID; the sweep continues.
inline BenchReport sweep(std::span<const int> widths, const RunConfig& base, const SweepOptions& opt = {}, std::string* warning = nullptr)
{
    for (int w : widths)
        if (!is_supported_width(w))
            throw Error("unsupported pack width " + std::to_string(w) + " (supported: 1,2,4,8,16,32,64,128,256,512)");
    BenchReport rep;
    rep.mesh = opt.mesh_label;
    rep.build_id = build_id();
    rep.steps = opt.steps;
    rep.warmup = opt.warmup;
    auto sampler = make_counter_sampler(opt.counters, warning);
    rep.counters = sampler->description();
    for (int w : widths) {
#if defined(__linux__)
        if (opt.isolate) {
            rep.rows.push_back(detail::measure_width_isolated(base, w, opt));
            continue;
        }
#endif
        rep.rows.push_back(detail::measure_width(base, w, opt, sampler.get()));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

inline constexpr std::string_view kReportColumns =
    "width,phase,steps,mean_ms,min_ms,max_ms,spread_pct,ipc,freq_ghz,mpki_l1,mpmi_l2,mpmi_l3,"
    "fp_scalar_frac,fp128_frac,fp256_frac,fp512_frac,branch_frac,load_frac,store_frac,equiv_ok";

namespace detail {

inline std::string fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string fixed(const std::optional<double>& v, int decimals) { return v ? fixed(*v, decimals) : std::string{}; }

// Cells after `steps` and before `equiv_ok`.
inline std::vector<std::string> metric_cells(const PhaseAggregate& p)
{
    std::vector<std::string> c{fixed(p.mean * 1e3, 6), fixed(p.min * 1e3, 6), fixed(p.max * 1e3, 6), fixed(p.spread * 100.0, 3)};
    if (p.metrics) {
        const auto& m = *p.metrics;
        for (auto s : {fixed(m.ipc, 6), fixed(m.freq * 1e-9, 6), fixed(m.mpki_l1, 6), fixed(m.mpmi_l2, 6), fixed(m.mpmi_l3, 6),
                       fixed(m.fp_scalar, 6), fixed(m.fp_128, 6), fixed(m.fp_256, 6), fixed(m.fp_512, 6), fixed(m.branch, 6),
                       fixed(m.load, 6), fixed(m.store, 6)})
            c.push_back(s);
    } else {
        c.resize(c.size() + 12);
    }
    return c;
}

inline const PhaseAggregate* find_phase(const SweepRow& r, PhaseTag t)
{
    for (const auto& p : r.phases)
        if (p.tag == t) return &p;
    return nullptr;
}

} // namespace detail

enum class ReportFormat { Csv, Markdown };

inline void emit_report(const BenchReport& rep, ReportFormat fmt, std::ostream& os)
{
    if (fmt == ReportFormat::Csv) {
        os << kReportColumns << '\n';
        for (const auto& r : rep.rows)
            for (const auto& p : r.phases) {
                os << r.width << ',' << phase_name(p.tag) << ',' << p.steps;
                for (const auto& cell : detail::metric_cells(p)) os << ',' << cell;
                os << ',' << (r.equivalent ? "OK" : "INVALID") << '\n';
            }
        return;
    }

    os << "# packfem sweep\n\n";
    os << "- mesh: " << rep.mesh << "\n- build: " << rep.build_id << "\n- steps: " << rep.steps << " (warmup " << rep.warmup
       << ")\n- counters: " << rep.counters << "\n\n";
    os << "| W | phase | mean ms | min ms | max ms | spread % | speedup vs W=1 | IPC | GHz | equiv |\n";
    os << "|---|---|---|---|---|---|---|---|---|---|\n";
    const SweepRow* base = nullptr;
    for (const auto& r : rep.rows)
        if (r.width == 1) base = &r;
    for (const auto& r : rep.rows)
        for (const auto& p : r.phases) {
            std::string speedup;
            if (const auto* b = base ? detail::find_phase(*base, p.tag) : nullptr; b && p.mean > 0.0)
                speedup = detail::fixed(b->mean / p.mean, 3);
            os << "| " << r.width << " | " << phase_name(p.tag) << " | " << detail::fixed(p.mean * 1e3, 6) << " | "
               << detail::fixed(p.min * 1e3, 6) << " | " << detail::fixed(p.max * 1e3, 6) << " | " << detail::fixed(p.spread * 100.0, 3)
               << (p.spread_flagged() ? " (!)" : "") << " | " << speedup << " | "
               << (p.metrics ? detail::fixed(p.metrics->ipc, 3) : "") << " | "
               << (p.metrics ? detail::fixed(p.metrics->freq * 1e-9, 3) : "") << " | "
               << (r.equivalent ? "OK" : "INVALID: " + r.note) << " |\n";
        }
    os << "\n(!) spread over steps above 3%\n";
}

inline void emit_report(const BenchReport& rep, ReportFormat fmt, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    emit_report(rep, fmt, out);
    out.flush();
    if (!out) throw Error("write to " + path + " failed");
}

} // namespace packfem

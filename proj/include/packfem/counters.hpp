#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#if defined(__linux__)
#include <cstring>
#include <linux/perf_event.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

namespace packfem {

enum class Counter : int {
    Cycles,
    Instructions,
    FpScalar,
    Fp128,
    Fp256,
    Fp512,
    Branches,
    Loads,
    Stores,
    L1Miss,
    L2Miss,
    L3Miss,
};

inline constexpr std::size_t kCounterCount = 12;

constexpr std::string_view counter_name(Counter c) noexcept
{
    constexpr std::array<std::string_view, kCounterCount> names{"cycles", "instructions", "fp_scalar", "fp_128", "fp_256", "fp_512",
                                                                "branches", "loads", "stores", "l1_miss", "l2_miss", "l3_miss"};
    return names[static_cast<std::size_t>(c)];
}

/// Counter readings; an absent entry means the event was not measured.
struct CounterSet {
    std::array<std::optional<double>, kCounterCount> values{};

    bool has(Counter c) const noexcept { return values[static_cast<std::size_t>(c)].has_value(); }
    double get(Counter c) const { return values[static_cast<std::size_t>(c)].value(); }
    void set(Counter c, double v) noexcept { values[static_cast<std::size_t>(c)] = v; }
    bool empty() const noexcept
    {
        for (const auto& v : values)
            if (v) return false;
        return true;
    }

    /// Sum; an event stays present only if present on both sides (or `*this` is empty).
    CounterSet& operator+=(const CounterSet& o) noexcept
    {
        const bool fresh = empty();
        for (std::size_t i = 0; i < kCounterCount; ++i) {
            if (fresh)
                values[i] = o.values[i];
            else if (values[i] && o.values[i])
                *values[i] += *o.values[i];
            else
                values[i].reset();
        }
        return *this;
    }
};

/// Process-wide counter sampling around a region.
class CounterSampler {
public:
    virtual ~CounterSampler() = default;
    virtual bool available() const = 0;
    virtual void start() = 0;
    virtual CounterSet stop() = 0;
    virtual std::string description() const = 0;
};

class NullCounterSampler final : public CounterSampler {
public:
    bool available() const override { return false; }
    void start() override {}
    CounterSet stop() override { return {}; }
    std::string description() const override { return "none"; }
};

#if defined(__linux__)

/// perf_event_open backed sampler. Events are opened one by one with
/// inheritance so threads spawned later are included; multiplexed counts are
/// scaled by enabled/running time.
class PerfCounterSampler final : public CounterSampler {
public:
    PerfCounterSampler()
    {
        const bool intel = is_intel_core();
        auto hw = [](std::uint64_t cfg) { return Event{PERF_TYPE_HARDWARE, cfg}; };
        auto raw = [](std::uint64_t event, std::uint64_t umask) { return Event{PERF_TYPE_RAW, event | (umask << 8)}; };
        auto cache = [](std::uint64_t id, std::uint64_t result) {
            return Event{PERF_TYPE_HW_CACHE, id | (PERF_COUNT_HW_CACHE_OP_READ << 8) | (result << 16)};
        };
        std::array<std::optional<Event>, kCounterCount> table{};
        table[idx(Counter::Cycles)] = hw(PERF_COUNT_HW_REF_CPU_CYCLES);
        table[idx(Counter::Instructions)] = hw(PERF_COUNT_HW_INSTRUCTIONS);
        table[idx(Counter::Branches)] = hw(PERF_COUNT_HW_BRANCH_INSTRUCTIONS);
        if (intel) {
            // Skylake-family FP_ARITH_INST_RETIRED, MEM_INST_RETIRED, MEM_LOAD_RETIRED.
            table[idx(Counter::FpScalar)] = raw(0xC7, 0x01);
            table[idx(Counter::Fp128)] = raw(0xC7, 0x04);
            table[idx(Counter::Fp256)] = raw(0xC7, 0x10);
            table[idx(Counter::Fp512)] = raw(0xC7, 0x40);
            table[idx(Counter::Loads)] = raw(0xD0, 0x81);
            table[idx(Counter::Stores)] = raw(0xD0, 0x82);
            table[idx(Counter::L1Miss)] = raw(0xD1, 0x08);
            table[idx(Counter::L2Miss)] = raw(0xD1, 0x10);
            table[idx(Counter::L3Miss)] = raw(0xD1, 0x20);
        } else {
            table[idx(Counter::L1Miss)] = cache(PERF_COUNT_HW_CACHE_L1D, PERF_COUNT_HW_CACHE_RESULT_MISS);
            table[idx(Counter::L3Miss)] = cache(PERF_COUNT_HW_CACHE_LL, PERF_COUNT_HW_CACHE_RESULT_MISS);
        }
        for (std::size_t i = 0; i < kCounterCount; ++i)
            if (table[i]) fds_[i] = open_event(*table[i]);
    }

    ~PerfCounterSampler() override
    {
        for (int fd : fds_)
            if (fd >= 0) ::close(fd);
    }

    PerfCounterSampler(const PerfCounterSampler&) = delete;
    PerfCounterSampler& operator=(const PerfCounterSampler&) = delete;

    bool available() const override { return fds_[idx(Counter::Cycles)] >= 0 && fds_[idx(Counter::Instructions)] >= 0; }

    void start() override
    {
        for (int fd : fds_)
            if (fd >= 0) {
                ::ioctl(fd, PERF_EVENT_IOC_RESET, 0);
                ::ioctl(fd, PERF_EVENT_IOC_ENABLE, 0);
            }
    }

    CounterSet stop() override
    {
        CounterSet out;
        for (std::size_t i = 0; i < kCounterCount; ++i) {
            const int fd = fds_[i];
            if (fd < 0) continue;
            ::ioctl(fd, PERF_EVENT_IOC_DISABLE, 0);
            std::uint64_t buf[3] = {};
            if (::read(fd, buf, sizeof buf) != static_cast<ssize_t>(sizeof buf) || buf[2] == 0) continue;
            out.values[i] = static_cast<double>(buf[0]) * (static_cast<double>(buf[1]) / static_cast<double>(buf[2]));
        }
        return out;
    }

    std::string description() const override
    {
        std::string s = "perf_event:";
        for (std::size_t i = 0; i < kCounterCount; ++i)
            if (fds_[i] >= 0) s += " " + std::string(counter_name(static_cast<Counter>(i)));
        return s;
    }

private:
    struct Event {
        std::uint32_t type;
        std::uint64_t config;
    };

    static constexpr std::size_t idx(Counter c) noexcept { return static_cast<std::size_t>(c); }

    static int open_event(const Event& e)
    {
        perf_event_attr attr;
        std::memset(&attr, 0, sizeof attr);
        attr.size = sizeof attr;
        attr.type = e.type;
        attr.config = e.config;
        attr.disabled = 1;
        attr.inherit = 1;
        attr.exclude_kernel = 1;
        attr.exclude_hv = 1;
        attr.read_format = PERF_FORMAT_TOTAL_TIME_ENABLED | PERF_FORMAT_TOTAL_TIME_RUNNING;
        return static_cast<int>(::syscall(SYS_perf_event_open, &attr, 0, -1, -1, 0));
    }

    static bool is_intel_core()
    {
        std::ifstream in("/proc/cpuinfo");
        std::string line;
        bool intel = false, family6 = false;
        while (std::getline(in, line)) {
            if (line.rfind("vendor_id", 0) == 0) intel = line.find("GenuineIntel") != std::string::npos;
            if (line.rfind("cpu family", 0) == 0) family6 = line.find(": 6") != std::string::npos;
            if (line.empty()) break;
        }
        return intel && family6;
    }

    std::array<int, kCounterCount> fds_{-1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1};
};

#endif

/// Null sampler when counters were not requested, PACKFEM_NO_COUNTERS=1 is set,
/// or the platform refuses; `warning` receives the reason in the last case.
inline std::unique_ptr<CounterSampler> make_counter_sampler(bool requested, std::string* warning = nullptr)
{
    if (!requested) return std::make_unique<NullCounterSampler>();
    if (const char* env = std::getenv("PACKFEM_NO_COUNTERS"); env && std::string_view(env) == "1")
        return std::make_unique<NullCounterSampler>();
#if defined(__linux__)
    auto perf = std::make_unique<PerfCounterSampler>();
    if (perf->available()) return perf;
    if (warning) *warning = "hardware counters unavailable (perf_event_open refused cycles/instructions); continuing without counters";
#else
    if (warning) *warning = "hardware counters not supported on this platform; continuing without counters";
#endif
    return std::make_unique<NullCounterSampler>();
}

} // namespace packfem

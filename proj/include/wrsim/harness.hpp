#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wrsim/memory_device.hpp"
#include "wrsim/runtime.hpp"
#include "wrsim/spaces.hpp"
#include "wrsim/workloads.hpp"

namespace wrsim {

using ordered_json = nlohmann::ordered_json;

// Either a synthetic workload or a trace file.
struct InstanceWorkload {
    std::optional<WorkloadSpec> spec;
    std::string trace_path;
};

struct ExperimentConfig {
    Variant collector = Variant::kg_w;
    Bytes nursery_size = 0;  // base nursery; 0 selects the workload's default
    double observer_multiplier = 2.0;
    Bytes heap_budget = 0;  // 0 selects the workload's default
    Bytes large_threshold = 8 * KiB;
    double loo_fraction = 1.0 / 8.0;
    std::uint64_t large_relocation_threshold = 4;

    Bytes heap_size = 2 * GiB;
    Bytes chunk_size = 4 * MiB;
    Bytes boot_bytes = 4 * MiB;
    bool zeroing = true;
    bool collector_through_cache = true;

    CacheGeometry cache;
    LifetimeModel lifetime;
    double op_ns = 5.0;
    double byte_ns = 0.25;
    bool include_collector_time = true;

    std::uint32_t instances = 1;
    std::vector<InstanceWorkload> workloads;  // one (replicated) or one per instance
    std::size_t quantum = 10'000;
    std::uint64_t seed = 0;
    double warmup_fraction = 0.1;

    void validate() const {
        if (instances == 0) throw ConfigError("instance count must be at least 1");
        if (workloads.empty()) throw ConfigError("no workload configured");
        if (workloads.size() != 1 && workloads.size() != instances) {
            throw ConfigError("give one workload, or one per instance");
        }
        for (const auto& w : workloads) {
            if (!w.spec && w.trace_path.empty()) throw ConfigError("workload needs a spec or a trace path");
            if (w.spec) w.spec->validate();
        }
        if (quantum == 0) throw ConfigError("scheduler quantum must be positive");
        if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("warm-up fraction must lie in [0, 1)");
        cache.validate();
        lifetime.validate();
    }
};

inline Bytes default_nursery(const InstanceWorkload& w) {
    return w.spec && w.spec->archetype == Archetype::large_object_graph ? 32 * MiB : 4 * MiB;
}

inline Bytes default_heap_budget(const InstanceWorkload& w) {
    if (!w.spec) return 64 * MiB;
    switch (w.spec->archetype) {
        case Archetype::nursery_churn: return 8 * MiB;
        case Archetype::mature_mutation: return 4 * MiB;
        case Archetype::large_object_graph: return 24 * MiB;
    }
    return 64 * MiB;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint32_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (std::uint64_t{index} + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct CollectionSummary {
    std::uint64_t count = 0;
    std::array<Bytes, kSpaceCount> bytes_copied{};
    std::uint64_t objects_scanned = 0;
    std::uint64_t objects_reclaimed = 0;
    std::uint64_t mark_writes = 0;
    std::uint64_t pcm_object_marks = 0;
    std::uint64_t large_relocated = 0;

    void add(const CollectionStats& s) {
        ++count;
        for (std::size_t i = 0; i < kSpaceCount; ++i) bytes_copied[i] += s.bytes_copied[i];
        objects_scanned += s.objects_scanned;
        objects_reclaimed += s.objects_reclaimed;
        mark_writes += s.mark_writes;
        pcm_object_marks += s.pcm_object_marks;
        large_relocated += s.large_relocated;
    }
    void add(const CollectionSummary& s) {
        count += s.count;
        for (std::size_t i = 0; i < kSpaceCount; ++i) bytes_copied[i] += s.bytes_copied[i];
        objects_scanned += s.objects_scanned;
        objects_reclaimed += s.objects_reclaimed;
        mark_writes += s.mark_writes;
        pcm_object_marks += s.pcm_object_marks;
        large_relocated += s.large_relocated;
    }
    Bytes total_copied() const {
        Bytes t = 0;
        for (Bytes b : bytes_copied) t += b;
        return t;
    }
};

struct InstanceReport {
    std::uint32_t index = 0;
    std::uint64_t seed = 0;
    std::uint64_t ops = 0;
    double elapsed_ns = 0;
    InstanceTraffic traffic;
    std::array<CollectionSummary, 3> collections{};
    std::optional<double> pcm_write_rate;
    std::optional<double> lifetime_years;

    Bytes write_bytes(MemoryKind k) const { return traffic.write_bytes(k); }
    Bytes read_bytes(MemoryKind k) const { return traffic.read_bytes(k); }
};

struct Failure {
    std::uint32_t instance = 0;
    std::size_t op_index = 0;
    std::string message;
};

struct BaselineComparison {
    Variant baseline = Variant::pcm_only;
    Bytes baseline_pcm_write_bytes = 0;
    std::optional<double> reduction;  // absent when the baseline wrote nothing to PCM
};

struct Report {
    ExperimentConfig config;
    std::optional<Failure> failure;
    std::vector<InstanceReport> instances;
    InstanceReport aggregate;
    std::optional<BaselineComparison> baseline;

    bool ok() const { return !failure.has_value(); }
    Bytes pcm_write_bytes() const { return aggregate.write_bytes(MemoryKind::pcm); }
};

namespace detail {

inline void finish_rates(InstanceReport& r, const LifetimeModel& model) {
    if (r.elapsed_ns > 0) {
        r.pcm_write_rate = pcm_write_rate(r.write_bytes(MemoryKind::pcm), r.elapsed_ns * 1e-9);
        r.lifetime_years = lifetime_years(model, *r.pcm_write_rate);
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

inline Trace load_workload(const ExperimentConfig& config, std::uint32_t index) {
    const InstanceWorkload& w = config.workloads.size() == 1 ? config.workloads[0] : config.workloads[index];
    if (w.spec) {
        WorkloadSpec spec = *w.spec;
        spec.seed = derive_seed(config.seed, index);
        spec.large_threshold = config.large_threshold;
        return generate(spec);
    }
    return parse_trace(detail::read_file(w.trace_path));
}

// Runs all instances round-robin over one shared cache. Each instance gets
// its own heap; after every stream is exhausted the cache is drained and the
// report is computed from post-warm-up counters.
inline Report run_experiment(const ExperimentConfig& config) {
    config.validate();
    Report report;
    report.config = config;

    const InstanceWorkload& first = config.workloads.front();
    const Bytes base_nursery = config.nursery_size ? config.nursery_size : default_nursery(first);
    const Bytes budget = config.heap_budget ? config.heap_budget : default_heap_budget(first);
    report.config.nursery_size = base_nursery;
    report.config.heap_budget = budget;
    CollectorConfig cc = make_collector_config(config.collector, base_nursery, budget, config.observer_multiplier);
    cc.large_threshold = config.large_threshold;
    cc.loo_fraction = config.loo_fraction;
    cc.large_relocation_threshold = config.large_relocation_threshold;
    HeapOptions options;
    options.heap_size = config.heap_size;
    options.chunk_size = config.chunk_size;
    options.boot_bytes = config.boot_bytes;
    options.line_size = config.cache.line;
    options.zeroing = config.zeroing;
    options.collector_through_cache = config.collector_through_cache;
    SimClock clock;
    clock.op_ns = config.op_ns;
    clock.byte_ns = config.byte_ns;
    clock.include_collector_time = config.include_collector_time;

    const std::uint32_t n = config.instances;
    std::vector<Trace> traces;
    traces.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) traces.push_back(load_workload(config, i));

    MemoryDevice device(config.cache);
    std::vector<std::unique_ptr<Instance>> instances;
    std::vector<TraceCursor> cursors(n);
    std::vector<std::size_t> warmup(n);
    std::vector<bool> warmed(n, false);
    std::vector<InstanceTraffic> traffic_at_warmup(n);
    std::vector<double> clock_at_warmup(n, 0.0);
    for (std::uint32_t i = 0; i < n; ++i) {
        instances.push_back(std::make_unique<Instance>(cc, options, device, i, clock));
        cursors[i].ops = traces[i];
        warmup[i] = static_cast<std::size_t>(static_cast<double>(traces[i].size()) * config.warmup_fraction);
        warmed[i] = warmup[i] == 0;
        instances[i]->heap().set_measuring(warmed[i]);
    }

    auto mark_warm = [&](std::uint32_t i) {
        warmed[i] = true;
        traffic_at_warmup[i] = device.counters().instance(i);
        clock_at_warmup[i] = instances[i]->clock().now_ns();
        instances[i]->heap().set_measuring(true);
    };

    std::uint32_t current = 0;
    try {
        bool any = true;
        while (any) {
            any = false;
            for (std::uint32_t i = 0; i < n; ++i) {
                if (cursors[i].done()) continue;
                current = i;
                any = true;
                const std::size_t start = cursors[i].position;
                std::size_t budget_ops = config.quantum;
                while (budget_ops > 0 && !cursors[i].done()) {
                    std::size_t step = budget_ops;
                    if (!warmed[i]) step = std::min(step, warmup[i] - cursors[i].position);
                    drive(*instances[i], cursors[i], step);
                    budget_ops = config.quantum - (cursors[i].position - start);
                    if (!warmed[i] && cursors[i].position == warmup[i]) mark_warm(i);
                }
                if constexpr (kCheckInvariants) {
                    invariant(cursors[i].position - start == std::min(config.quantum, traces[i].size() - start),
                              "scheduler quantum not honoured");
                }
            }
        }
    } catch (const SimError& e) {
        report.failure = Failure{current, cursors[current].position, e.what()};
    }
    device.drain();

    for (std::uint32_t i = 0; i < n; ++i) {
        const Instance& inst = *instances[i];
        if constexpr (kCheckInvariants) {
            invariant(device.counters().instance(i).emitted_total() == inst.heap().emitted_total(),
                      "runtime traffic not fully accounted by the memory device");
        }
        InstanceReport r;
        r.index = i;
        const InstanceWorkload& w = config.workloads.size() == 1 ? config.workloads[0] : config.workloads[i];
        r.seed = w.spec ? derive_seed(config.seed, i) : 0;
        r.ops = cursors[i].position;
        r.traffic = device.counters().instance(i).minus(traffic_at_warmup[i]);
        r.elapsed_ns = inst.clock().now_ns() - clock_at_warmup[i];
        for (const auto& s : inst.heap().collection_log()) {
            if (s.measured) r.collections[static_cast<std::size_t>(s.kind)].add(s);
        }
        detail::finish_rates(r, config.lifetime);
        report.instances.push_back(r);
    }

    InstanceReport agg;
    agg.index = n;
    agg.seed = config.seed;
    for (const auto& r : report.instances) {
        agg.ops += r.ops;
        agg.elapsed_ns = std::max(agg.elapsed_ns, r.elapsed_ns);
        agg.traffic.add(r.traffic);
        for (std::size_t k = 0; k < 3; ++k) agg.collections[k].add(r.collections[k]);
    }
    detail::finish_rates(agg, config.lifetime);
    report.aggregate = agg;
    return report;
}

inline std::optional<double> reduction(Bytes variant_pcm, Bytes baseline_pcm) {
    if (baseline_pcm == 0) return std::nullopt;
    return 1.0 - static_cast<double>(variant_pcm) / static_cast<double>(baseline_pcm);
}

struct PairResult {
    Report baseline;
    Report variant;
    std::optional<double> reduction;
};

// Runs PCM-Only and the configured variant on identical workloads and seeds.
inline PairResult run_baseline_pair(const ExperimentConfig& config) {
    if (config.collector == Variant::pcm_only) throw ConfigError("baseline pair needs a variant other than PCM-Only");
    ExperimentConfig base = config;
    base.collector = Variant::pcm_only;
    PairResult out{run_experiment(base), run_experiment(config), std::nullopt};
    out.reduction = reduction(out.variant.pcm_write_bytes(), out.baseline.pcm_write_bytes());
    out.variant.baseline = BaselineComparison{Variant::pcm_only, out.baseline.pcm_write_bytes(), out.reduction};
    return out;
}

struct SweepPoint {
    Variant collector;
    Bytes cache_capacity;
    std::uint32_t instances;
};

// Cross product of collectors x cache sizes x instance counts. Points are
// independent and may run on `jobs` threads; results keep the point order.
inline std::vector<std::pair<SweepPoint, Report>> run_sweep(const ExperimentConfig& base,
                                                           const std::vector<Variant>& collectors,
                                                           const std::vector<Bytes>& cache_sizes,
                                                           const std::vector<std::uint32_t>& instance_counts,
                                                           unsigned jobs = 1) {
    std::vector<SweepPoint> points;
    for (Variant v : collectors)
        for (Bytes c : cache_sizes)
            for (std::uint32_t n : instance_counts) points.push_back({v, c, n});
    std::vector<std::pair<SweepPoint, Report>> results(points.size());
    auto run_point = [&](std::size_t k) {
        ExperimentConfig cfg = base;
        cfg.collector = points[k].collector;
        cfg.cache.capacity = points[k].cache_capacity;
        cfg.instances = points[k].instances;
        if (cfg.workloads.size() != 1 && cfg.workloads.size() != cfg.instances) cfg.workloads.resize(1);
        results[k] = {points[k], run_experiment(cfg)};
    };
    jobs = std::max(1u, jobs);
    for (std::size_t k = 0; k < points.size(); k += jobs) {
        std::vector<std::future<void>> batch;
        for (std::size_t j = k; j < std::min(points.size(), k + jobs); ++j) {
            batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, run_point, j));
        }
        for (auto& f : batch) f.get();
    }
    return results;
}

// ---- configuration I/O ----------------------------------------------------

inline ordered_json workload_to_json(const InstanceWorkload& w) {
    ordered_json j;
    if (!w.spec) {
        j["trace"] = w.trace_path;
        return j;
    }
    const WorkloadSpec& s = *w.spec;
    j["archetype"] = std::string(to_string(s.archetype));
    j["op_count"] = s.op_count;
    j["size_log_mean"] = s.size_log_mean;
    j["size_log_sigma"] = s.size_log_sigma;
    j["max_refs"] = s.max_refs;
    j["survival"] = s.survival;
    j["old_write_fraction"] = s.old_write_fraction;
    j["mutation_locality"] = s.mutation_locality;
    j["hot_fraction"] = s.hot_fraction;
    j["large_fraction"] = s.large_fraction;
    j["large_min"] = s.large_min;
    j["large_max"] = s.large_max;
    j["large_survival"] = s.large_survival;
    j["window"] = s.window;
    j["containers"] = s.containers;
    j["container_slots"] = s.container_slots;
    j["writes_per_alloc"] = s.writes_per_alloc;
    j["reads_per_alloc"] = s.reads_per_alloc;
    j["links_per_alloc"] = s.links_per_alloc;
    j["epoch_bytes"] = s.epoch_bytes;
    return j;
}

template <class T>
void read_field(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

inline InstanceWorkload workload_from_json(const ordered_json& j) {
    InstanceWorkload w;
    if (j.contains("trace")) {
        w.trace_path = j.at("trace").get<std::string>();
        return w;
    }
    if (!j.contains("archetype")) throw ConfigError("workload needs 'archetype' or 'trace'");
    WorkloadSpec s = default_workload(parse_archetype(j.at("archetype").get<std::string>()));
    read_field(j, "op_count", s.op_count);
    read_field(j, "size_log_mean", s.size_log_mean);
    read_field(j, "size_log_sigma", s.size_log_sigma);
    read_field(j, "max_refs", s.max_refs);
    read_field(j, "survival", s.survival);
    read_field(j, "old_write_fraction", s.old_write_fraction);
    read_field(j, "mutation_locality", s.mutation_locality);
    read_field(j, "hot_fraction", s.hot_fraction);
    read_field(j, "large_fraction", s.large_fraction);
    read_field(j, "large_min", s.large_min);
    read_field(j, "large_max", s.large_max);
    read_field(j, "large_survival", s.large_survival);
    read_field(j, "window", s.window);
    read_field(j, "containers", s.containers);
    read_field(j, "container_slots", s.container_slots);
    read_field(j, "writes_per_alloc", s.writes_per_alloc);
    read_field(j, "reads_per_alloc", s.reads_per_alloc);
    read_field(j, "links_per_alloc", s.links_per_alloc);
    read_field(j, "epoch_bytes", s.epoch_bytes);
    w.spec = s;
    return w;
}

inline ordered_json config_to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["collector"] = std::string(to_string(c.collector));
    j["nursery_size"] = c.nursery_size;
    j["observer_multiplier"] = c.observer_multiplier;
    j["heap_budget"] = c.heap_budget;
    j["large_threshold"] = c.large_threshold;
    j["loo_fraction"] = c.loo_fraction;
    j["large_relocation_threshold"] = c.large_relocation_threshold;
    j["heap_size"] = c.heap_size;
    j["chunk_size"] = c.chunk_size;
    j["boot_bytes"] = c.boot_bytes;
    j["zeroing"] = c.zeroing;
    j["collector_through_cache"] = c.collector_through_cache;
    j["cache"] = {{"capacity", c.cache.capacity}, {"ways", c.cache.ways}, {"line", c.cache.line}};
    j["lifetime"] = {{"capacity_bytes", c.lifetime.capacity_bytes},
                     {"endurance", c.lifetime.endurance},
                     {"efficiency", c.lifetime.efficiency}};
    j["clock"] = {{"op_ns", c.op_ns}, {"byte_ns", c.byte_ns}, {"include_collector_time", c.include_collector_time}};
    j["instances"] = c.instances;
    j["workloads"] = ordered_json::array();
    for (const auto& w : c.workloads) j["workloads"].push_back(workload_to_json(w));
    j["quantum"] = c.quantum;
    j["seed"] = c.seed;
    j["warmup_fraction"] = c.warmup_fraction;
    return j;
}

inline ExperimentConfig config_from_json(const ordered_json& j) {
    ExperimentConfig c;
    if (j.contains("collector")) c.collector = parse_variant(j.at("collector").get<std::string>());
    read_field(j, "nursery_size", c.nursery_size);
    read_field(j, "observer_multiplier", c.observer_multiplier);
    read_field(j, "heap_budget", c.heap_budget);
    read_field(j, "large_threshold", c.large_threshold);
    read_field(j, "loo_fraction", c.loo_fraction);
    read_field(j, "large_relocation_threshold", c.large_relocation_threshold);
    read_field(j, "heap_size", c.heap_size);
    read_field(j, "chunk_size", c.chunk_size);
    read_field(j, "boot_bytes", c.boot_bytes);
    read_field(j, "zeroing", c.zeroing);
    read_field(j, "collector_through_cache", c.collector_through_cache);
    if (j.contains("cache")) {
        const auto& k = j.at("cache");
        read_field(k, "capacity", c.cache.capacity);
        read_field(k, "ways", c.cache.ways);
        read_field(k, "line", c.cache.line);
    }
    if (j.contains("lifetime")) {
        const auto& k = j.at("lifetime");
        read_field(k, "capacity_bytes", c.lifetime.capacity_bytes);
        read_field(k, "endurance", c.lifetime.endurance);
        read_field(k, "efficiency", c.lifetime.efficiency);
    }
    if (j.contains("clock")) {
        const auto& k = j.at("clock");
        read_field(k, "op_ns", c.op_ns);
        read_field(k, "byte_ns", c.byte_ns);
        read_field(k, "include_collector_time", c.include_collector_time);
    }
    read_field(j, "instances", c.instances);
    if (j.contains("workloads")) {
        for (const auto& w : j.at("workloads")) c.workloads.push_back(workload_from_json(w));
    } else if (j.contains("workload")) {
        c.workloads.push_back(workload_from_json(j.at("workload")));
    }
    read_field(j, "quantum", c.quantum);
    read_field(j, "seed", c.seed);
    read_field(j, "warmup_fraction", c.warmup_fraction);
    return c;
}

// ---- report emission --------------------------------------------------------

enum class ReportFormat : std::uint8_t { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw ConfigError("unknown report format '" + std::string(s) + "'");
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline ordered_json optional_number(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

inline ordered_json collections_to_json(const std::array<CollectionSummary, 3>& cs) {
    ordered_json j;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& s = cs[k];
        ordered_json copied;
        for (SpaceName sp : kAllSpaces)
            if (s.bytes_copied[index_of(sp)]) copied[std::string(to_string(sp))] = s.bytes_copied[index_of(sp)];
        j[std::string(to_string(static_cast<CollectionKind>(k)))] = {
            {"count", s.count},
            {"bytes_copied", copied.is_null() ? ordered_json::object() : copied},
            {"objects_scanned", s.objects_scanned},
            {"objects_reclaimed", s.objects_reclaimed},
            {"mark_writes", s.mark_writes},
            {"pcm_object_marks", s.pcm_object_marks},
            {"large_relocated", s.large_relocated},
        };
    }
    return j;
}

inline ordered_json instance_to_json(const InstanceReport& r) {
    ordered_json j;
    j["index"] = r.index;
    j["seed"] = r.seed;
    j["ops"] = r.ops;
    j["elapsed_ns"] = r.elapsed_ns;
    j["dram_write_bytes"] = r.write_bytes(MemoryKind::dram);
    j["dram_read_bytes"] = r.read_bytes(MemoryKind::dram);
    j["pcm_write_bytes"] = r.write_bytes(MemoryKind::pcm);
    j["pcm_read_bytes"] = r.read_bytes(MemoryKind::pcm);
    j["pcm_write_rate"] = optional_number(r.pcm_write_rate);
    j["lifetime_years"] = optional_number(r.lifetime_years);
    j["writebacks"] = r.traffic.writebacks;
    j["fills"] = r.traffic.fills;
    ordered_json spaces = ordered_json::object();
    for (MemoryKind k : {MemoryKind::dram, MemoryKind::pcm}) {
        for (SpaceName s : kAllSpaces) {
            const auto& m = r.traffic.memory[index_of(k)][index_of(s)];
            const auto& e = r.traffic.emitted[index_of(k)][index_of(s)];
            if (m.write || m.read || e.write || e.read) {
                spaces[std::string(to_string(s))] = {{"memory", std::string(to_string(k))},
                                                     {"write_bytes", m.write},
                                                     {"read_bytes", m.read},
                                                     {"emitted_write_bytes", e.write},
                                                     {"emitted_read_bytes", e.read}};
            }
        }
    }
    j["spaces"] = spaces;
    j["collections"] = collections_to_json(r.collections);
    return j;
}

}  // namespace detail

inline ordered_json report_to_json(const Report& report) {
    ordered_json j;
    j["status"] = report.ok() ? "ok" : "failed";
    if (report.failure) {
        j["failure"] = {{"instance", report.failure->instance},
                        {"op_index", report.failure->op_index},
                        {"message", report.failure->message}};
    }
    j["seed"] = report.config.seed;
    j["config"] = config_to_json(report.config);
    j["instances"] = ordered_json::array();
    for (const auto& r : report.instances) j["instances"].push_back(detail::instance_to_json(r));
    j["aggregate"] = detail::instance_to_json(report.aggregate);
    if (report.baseline) {
        j["baseline"] = {{"collector", std::string(to_string(report.baseline->baseline))},
                         {"pcm_write_bytes", report.baseline->baseline_pcm_write_bytes},
                         {"reduction", detail::optional_number(report.baseline->reduction)}};
    }
    return j;
}

inline constexpr const char* kCsvHeader =
    "row,instance,collector,cache_capacity,instances,seed,ops,elapsed_ns,dram_write_bytes,dram_read_bytes,"
    "pcm_write_bytes,pcm_read_bytes,pcm_write_rate,lifetime_years,minor_collections,observer_collections,"
    "major_collections,bytes_copied,mark_writes,pcm_object_marks,large_relocated,reduction,status";

inline void write_csv_rows(std::ostream& out, const Report& report) {
    auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string("NA"); };
    const std::string reduction_text = report.baseline ? opt(report.baseline->reduction) : std::string("NA");
    const std::string status = report.ok() ? "ok" : "failed";
    auto row = [&](const InstanceReport& r, bool aggregate) {
        Bytes copied = 0, marks = 0, pcm_marks = 0, relocated = 0;
        for (const auto& c : r.collections) {
            copied += c.total_copied();
            marks += c.mark_writes;
            pcm_marks += c.pcm_object_marks;
            relocated += c.large_relocated;
        }
        out << (aggregate ? "aggregate" : "instance") << ',' << (aggregate ? std::string("all") : std::to_string(r.index))
            << ',' << to_string(report.config.collector) << ',' << report.config.cache.capacity << ','
            << report.config.instances << ',' << r.seed << ',' << r.ops << ','
            << detail::format_double(r.elapsed_ns) << ',' << r.write_bytes(MemoryKind::dram) << ','
            << r.read_bytes(MemoryKind::dram) << ',' << r.write_bytes(MemoryKind::pcm) << ','
            << r.read_bytes(MemoryKind::pcm) << ',' << opt(r.pcm_write_rate) << ',' << opt(r.lifetime_years) << ','
            << r.collections[0].count << ',' << r.collections[1].count << ',' << r.collections[2].count << ','
            << copied << ',' << marks << ',' << pcm_marks << ',' << relocated << ','
            << (aggregate ? reduction_text : std::string("NA")) << ',' << status << '\n';
    };
    for (const auto& r : report.instances) row(r, false);
    row(report.aggregate, true);
}

inline void emit_report(const Report& report, ReportFormat format, std::ostream& out) {
    if (format == ReportFormat::json) {
        out << report_to_json(report).dump(2) << '\n';
    } else {
        out << kCsvHeader << '\n';
        write_csv_rows(out, report);
    }
    if (!out) throw IoError("failed to write the report");
}

inline void emit_report(const Report& report, ReportFormat format, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    emit_report(report, format, out);
    out.flush();
    if (!out) throw IoError("failed to write '" + path + "'");
}

}  // namespace wrsim

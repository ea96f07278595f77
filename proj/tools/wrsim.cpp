// Command-line front end for the write-rationing simulator.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "wrsim/wrsim.hpp"

namespace {

using namespace wrsim;

// Every flag is optional so that a --config file can supply the base values;
// flags given on the command line win.
struct Flags {
    std::string config_path;
    std::string collector;
    std::uint64_t nursery_size = 0;
    double observer_multiplier = 0;
    std::uint64_t heap_budget = 0;
    std::uint64_t large_threshold = 0;
    double loo_fraction = 0;
    std::uint64_t large_relocation_threshold = 0;
    std::uint64_t heap_size = 0;
    std::uint64_t chunk_size = 0;
    std::uint64_t boot_bytes = 0;
    bool zeroing = true;
    bool collector_through_cache = true;
    std::uint64_t cache_capacity = 0;
    std::uint32_t cache_ways = 0;
    std::uint64_t cache_line = 0;
    double op_ns = 0;
    double byte_ns = 0;
    bool include_collector_time = true;
    std::uint32_t instances = 0;
    std::size_t quantum = 0;
    std::uint64_t seed = 0;
    double warmup_fraction = 0;

    std::string archetype;
    std::string trace;
    std::uint64_t op_count = 0;
    double survival = 0;
    double old_write_fraction = 0;
    double mutation_locality = 0;
    double hot_fraction = 0;
    double large_fraction = 0;
    std::uint64_t large_min = 0;
    std::uint64_t large_max = 0;
    double large_survival = 0;
    double size_log_mean = 0;
    double size_log_sigma = 0;
    std::uint64_t epoch_bytes = 0;

    std::string format = "json";
    std::string output;
    unsigned repeat = 1;
};

class Binder {
public:
    Binder(CLI::App& app, Flags& f) : app_(app), f_(f) {}

    void experiment(bool seed_required) {
        opt(app_.add_option("--config", f_.config_path, "JSON experiment config")->check(CLI::ExistingFile));
        opt(app_.add_option("--collector", f_.collector, "collector variant, e.g. KG-W"));
        size(app_.add_option("--nursery_size", f_.nursery_size, "base nursery size"));
        opt(app_.add_option("--observer_multiplier", f_.observer_multiplier));
        size(app_.add_option("--heap_budget", f_.heap_budget, "mature + large-object budget"));
        size(app_.add_option("--large_threshold", f_.large_threshold));
        opt(app_.add_option("--loo_fraction", f_.loo_fraction));
        opt(app_.add_option("--large_relocation_threshold", f_.large_relocation_threshold));
        size(app_.add_option("--heap_size", f_.heap_size));
        size(app_.add_option("--chunk_size", f_.chunk_size));
        size(app_.add_option("--boot_bytes", f_.boot_bytes));
        opt(app_.add_option("--zeroing", f_.zeroing));
        opt(app_.add_option("--collector_through_cache", f_.collector_through_cache));
        size(app_.add_option("--cache_capacity", f_.cache_capacity, "LLC capacity, 0 disables the cache"));
        opt(app_.add_option("--cache_ways", f_.cache_ways));
        size(app_.add_option("--cache_line", f_.cache_line));
        opt(app_.add_option("--op_ns", f_.op_ns));
        opt(app_.add_option("--byte_ns", f_.byte_ns));
        opt(app_.add_option("--include_collector_time", f_.include_collector_time));
        opt(app_.add_option("--instances", f_.instances));
        opt(app_.add_option("--quantum", f_.quantum));
        opt(app_.add_option("--warmup_fraction", f_.warmup_fraction));
        auto* s = app_.add_option("--seed", f_.seed, "master seed");
        if (seed_required) s->required();
        opt(s);
        workload();
        opt(app_.add_option("--format", f_.format)->check(CLI::IsMember({"csv", "json"})));
        opt(app_.add_option("--output", f_.output, "destination file (default stdout)"));
    }

    void workload() {
        opt(app_.add_option("--archetype", f_.archetype)
                ->check(CLI::IsMember({"nursery-churn", "mature-mutation", "large-object-graph"})));
        opt(app_.add_option("--trace", f_.trace, "trace file to replay")->check(CLI::ExistingFile));
        opt(app_.add_option("--op_count", f_.op_count));
        opt(app_.add_option("--survival", f_.survival));
        opt(app_.add_option("--old_write_fraction", f_.old_write_fraction));
        opt(app_.add_option("--mutation_locality", f_.mutation_locality));
        opt(app_.add_option("--hot_fraction", f_.hot_fraction));
        opt(app_.add_option("--large_fraction", f_.large_fraction));
        size(app_.add_option("--large_min", f_.large_min));
        size(app_.add_option("--large_max", f_.large_max));
        opt(app_.add_option("--large_survival", f_.large_survival));
        opt(app_.add_option("--size_log_mean", f_.size_log_mean));
        opt(app_.add_option("--size_log_sigma", f_.size_log_sigma));
        size(app_.add_option("--epoch_bytes", f_.epoch_bytes));
    }

    bool given(const std::string& name) const {
        for (auto* o : options_)
            if (o->check_lname(name.substr(2)) && o->count() > 0) return true;
        return false;
    }

private:
    CLI::Option* opt(CLI::Option* o) {
        options_.push_back(o);
        return o;
    }
    void size(CLI::Option* o) { opt(o)->transform(CLI::AsSizeValue(false)); }

    CLI::App& app_;
    Flags& f_;
    std::vector<CLI::Option*> options_;
};

WorkloadSpec apply_workload_flags(WorkloadSpec s, const Binder& b, const Flags& f) {
    if (b.given("--op_count")) s.op_count = f.op_count;
    if (b.given("--survival")) s.survival = f.survival;
    if (b.given("--old_write_fraction")) s.old_write_fraction = f.old_write_fraction;
    if (b.given("--mutation_locality")) s.mutation_locality = f.mutation_locality;
    if (b.given("--hot_fraction")) s.hot_fraction = f.hot_fraction;
    if (b.given("--large_fraction")) s.large_fraction = f.large_fraction;
    if (b.given("--large_min")) s.large_min = f.large_min;
    if (b.given("--large_max")) s.large_max = f.large_max;
    if (b.given("--large_survival")) s.large_survival = f.large_survival;
    if (b.given("--size_log_mean")) s.size_log_mean = f.size_log_mean;
    if (b.given("--size_log_sigma")) s.size_log_sigma = f.size_log_sigma;
    if (b.given("--epoch_bytes")) s.epoch_bytes = f.epoch_bytes;
    return s;
}

ExperimentConfig build_config(const Binder& b, const Flags& f) {
    ExperimentConfig c;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw IoError("cannot open '" + f.config_path + "'");
        ordered_json j;
        try {
            j = ordered_json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("malformed config '" + f.config_path + "': " + e.what());
        }
        c = config_from_json(j);
    }
    if (b.given("--collector")) c.collector = parse_variant(f.collector);
    if (b.given("--nursery_size")) c.nursery_size = f.nursery_size;
    if (b.given("--observer_multiplier")) c.observer_multiplier = f.observer_multiplier;
    if (b.given("--heap_budget")) c.heap_budget = f.heap_budget;
    if (b.given("--large_threshold")) c.large_threshold = f.large_threshold;
    if (b.given("--loo_fraction")) c.loo_fraction = f.loo_fraction;
    if (b.given("--large_relocation_threshold")) c.large_relocation_threshold = f.large_relocation_threshold;
    if (b.given("--heap_size")) c.heap_size = f.heap_size;
    if (b.given("--chunk_size")) c.chunk_size = f.chunk_size;
    if (b.given("--boot_bytes")) c.boot_bytes = f.boot_bytes;
    if (b.given("--zeroing")) c.zeroing = f.zeroing;
    if (b.given("--collector_through_cache")) c.collector_through_cache = f.collector_through_cache;
    if (b.given("--cache_capacity")) c.cache.capacity = f.cache_capacity;
    if (b.given("--cache_ways")) c.cache.ways = f.cache_ways;
    if (b.given("--cache_line")) c.cache.line = f.cache_line;
    if (b.given("--op_ns")) c.op_ns = f.op_ns;
    if (b.given("--byte_ns")) c.byte_ns = f.byte_ns;
    if (b.given("--include_collector_time")) c.include_collector_time = f.include_collector_time;
    if (b.given("--instances")) c.instances = f.instances;
    if (b.given("--quantum")) c.quantum = f.quantum;
    if (b.given("--seed")) c.seed = f.seed;
    if (b.given("--warmup_fraction")) c.warmup_fraction = f.warmup_fraction;

    if (b.given("--trace")) {
        c.workloads = {InstanceWorkload{std::nullopt, f.trace}};
    } else if (b.given("--archetype")) {
        c.workloads = {InstanceWorkload{default_workload(parse_archetype(f.archetype)), ""}};
    }
    if (c.workloads.empty()) throw ConfigError("no workload: give --archetype, --trace, or a config file");
    for (auto& w : c.workloads)
        if (w.spec) w.spec = apply_workload_flags(*w.spec, b, f);
    return c;
}

// Writes to --output when given, else stdout.
template <class Fn>
void with_output(const Flags& f, Fn&& fn) {
    if (f.output.empty()) {
        fn(std::cout);
        std::cout.flush();
        if (!std::cout) throw IoError("failed to write to stdout");
        return;
    }
    std::ofstream out(f.output, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + f.output + "' for writing");
    fn(out);
    out.flush();
    if (!out) throw IoError("failed to write '" + f.output + "'");
}

int report_failures(const std::vector<const Report*>& reports) {
    int status = 0;
    for (const Report* r : reports) {
        if (r->failure) {
            std::cerr << "wrsim: run failed in instance " << r->failure->instance << " at op "
                      << r->failure->op_index << ": " << r->failure->message << '\n';
            status = 2;
        }
    }
    return status;
}

int cmd_run(const Binder& b, const Flags& f) {
    const ExperimentConfig base = build_config(b, f);
    const ReportFormat format = parse_report_format(f.format);
    if (f.repeat == 0) throw ConfigError("--repeat must be at least 1");
    std::vector<Report> reports;
    for (unsigned r = 0; r < f.repeat; ++r) {
        ExperimentConfig c = base;
        if (r > 0) c.seed = derive_seed(base.seed, 0x10000u + r);
        reports.push_back(run_experiment(c));
    }
    with_output(f, [&](std::ostream& out) {
        if (reports.size() == 1) {
            emit_report(reports[0], format, out);
        } else if (format == ReportFormat::json) {
            ordered_json arr = ordered_json::array();
            for (const auto& r : reports) arr.push_back(report_to_json(r));
            out << arr.dump(2) << '\n';
        } else {
            out << kCsvHeader << '\n';
            for (const auto& r : reports) write_csv_rows(out, r);
        }
    });
    std::vector<const Report*> ptrs;
    for (const auto& r : reports) ptrs.push_back(&r);
    return report_failures(ptrs);
}

int cmd_pair(const Binder& b, const Flags& f) {
    const ExperimentConfig c = build_config(b, f);
    const PairResult p = run_baseline_pair(c);
    with_output(f, [&](std::ostream& out) {
        if (parse_report_format(f.format) == ReportFormat::json) {
            ordered_json j;
            j["baseline"] = report_to_json(p.baseline);
            j["variant"] = report_to_json(p.variant);
            j["reduction"] = p.reduction ? ordered_json(*p.reduction) : ordered_json(nullptr);
            out << j.dump(2) << '\n';
        } else {
            out << kCsvHeader << '\n';
            write_csv_rows(out, p.baseline);
            write_csv_rows(out, p.variant);
        }
    });
    return report_failures({&p.baseline, &p.variant});
}

struct SweepFlags {
    std::vector<std::string> collectors;
    std::vector<std::uint64_t> cache_sizes;
    std::vector<std::uint32_t> instance_counts;
    unsigned jobs = 1;
    std::string output_dir;
};

int cmd_sweep(const Binder& b, const Flags& f, const SweepFlags& s) {
    const ExperimentConfig base = build_config(b, f);
    const ReportFormat format = parse_report_format(f.format);
    std::vector<Variant> collectors;
    for (const auto& name : s.collectors) collectors.push_back(parse_variant(name));
    if (collectors.empty()) collectors.push_back(base.collector);
    std::vector<Bytes> caches(s.cache_sizes.begin(), s.cache_sizes.end());
    if (caches.empty()) caches.push_back(base.cache.capacity);
    std::vector<std::uint32_t> counts = s.instance_counts;
    if (counts.empty()) counts.push_back(base.instances);

    const auto results = run_sweep(base, collectors, caches, counts, s.jobs);
    std::vector<const Report*> ptrs;
    for (const auto& [point, report] : results) ptrs.push_back(&report);

    if (!s.output_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(s.output_dir, ec);
        if (ec) throw IoError("cannot create '" + s.output_dir + "': " + ec.message());
        for (const auto& [point, report] : results) {
            std::string name(to_string(point.collector));
            for (char& ch : name)
                if (ch == '+') ch = 'p';
            const std::string path = s.output_dir + "/" + name + "_c" + std::to_string(point.cache_capacity) + "_n" +
                                     std::to_string(point.instances) + (format == ReportFormat::csv ? ".csv" : ".json");
            emit_report(report, format, path);
        }
        return report_failures(ptrs);
    }
    with_output(f, [&](std::ostream& out) {
        if (format == ReportFormat::json) {
            ordered_json arr = ordered_json::array();
            for (const auto& [point, report] : results) arr.push_back(report_to_json(report));
            out << arr.dump(2) << '\n';
        } else {
            out << kCsvHeader << '\n';
            for (const auto& [point, report] : results) write_csv_rows(out, report);
        }
    });
    return report_failures(ptrs);
}

int cmd_gen_trace(const Binder& b, const Flags& f) {
    if (!b.given("--archetype")) throw ConfigError("gen-trace needs --archetype");
    WorkloadSpec spec = apply_workload_flags(default_workload(parse_archetype(f.archetype)), b, f);
    spec.seed = f.seed;
    const Trace trace = generate(spec);
    with_output(f, [&](std::ostream& out) {
        out << "# " << to_string(spec.archetype) << " seed " << spec.seed << " ops " << trace.size() << '\n';
        out << serialize_trace(trace);
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid DRAM/PCM write-rationing garbage collection simulator"};
    app.require_subcommand(1);

    Flags run_flags, pair_flags, sweep_flags, gen_flags;
    SweepFlags sweep_extra;

    auto* run = app.add_subcommand("run", "run one experiment");
    Binder run_b(*run, run_flags);
    run_b.experiment(true);
    run->add_option("--repeat", run_flags.repeat, "repetitions with derived seeds")->check(CLI::PositiveNumber);

    auto* pair = app.add_subcommand("pair", "compare a collector against PCM-Only");
    Binder pair_b(*pair, pair_flags);
    pair_b.experiment(true);

    auto* sweep = app.add_subcommand("sweep", "cross product of collectors x cache sizes x instance counts");
    Binder sweep_b(*sweep, sweep_flags);
    sweep_b.experiment(true);
    sweep->add_option("--collectors", sweep_extra.collectors)->delimiter(',');
    sweep->add_option("--cache_sizes", sweep_extra.cache_sizes)->delimiter(',')->transform(CLI::AsSizeValue(false));
    sweep->add_option("--instance_counts", sweep_extra.instance_counts)->delimiter(',');
    sweep->add_option("--jobs", sweep_extra.jobs, "experiments run in parallel")->check(CLI::PositiveNumber);
    sweep->add_option("--output_dir", sweep_extra.output_dir, "write one report file per point");

    auto* gen = app.add_subcommand("gen-trace", "write a generated workload as a trace file");
    Binder gen_b(*gen, gen_flags);
    gen_flags.seed = 1;
    gen_b.workload();
    gen->add_option("--seed", gen_flags.seed, "generator seed");
    gen->add_option("--output", gen_flags.output, "destination file (default stdout)");

    auto* life = app.add_subcommand("lifetime", "PCM lifetime in years for a write rate");
    double rate = 0;
    LifetimeModel model;
    life->add_option("--rate", rate, "PCM write rate in bytes per second")->required();
    life->add_option("--capacity_bytes", model.capacity_bytes);
    life->add_option("--endurance", model.endurance);
    life->add_option("--efficiency", model.efficiency);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) return cmd_run(run_b, run_flags);
        if (pair->parsed()) return cmd_pair(pair_b, pair_flags);
        if (sweep->parsed()) return cmd_sweep(sweep_b, sweep_flags, sweep_extra);
        if (gen->parsed()) return cmd_gen_trace(gen_b, gen_flags);
        if (life->parsed()) {
            const double years = lifetime_years(model, rate);
            std::ostringstream s;
            s.precision(6);
            s << std::fixed << years;
            std::cout << s.str() << '\n';
            return 0;
        }
    } catch (const SimError& e) {
        std::cerr << "wrsim: error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "wrsim: internal error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}

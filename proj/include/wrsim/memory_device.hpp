#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "wrsim/common.hpp"

namespace wrsim {

enum class AccessKind : std::uint8_t { read, write };

struct CacheGeometry {
    Bytes capacity = 20 * MiB;
    std::uint32_t ways = 16;
    Bytes line = 64;

    bool enabled() const { return capacity != 0; }
    std::uint64_t sets() const { return enabled() ? capacity / (Bytes{ways} * line) : 0; }
    std::uint64_t lines() const { return enabled() ? capacity / line : 0; }

    void validate() const {
        if (line == 0) throw ConfigError("cache line size must be positive");
        if (!enabled()) return;
        if (ways == 0) throw ConfigError("cache associativity must be positive");
        if (capacity % (Bytes{ways} * line) != 0) {
            throw ConfigError("cache capacity must be a multiple of ways x line");
        }
    }

    // Instances share the cache but live in separate address spaces; their
    // lines are colored by an instance-dependent offset so identical virtual
    // addresses do not all collide in the same sets.
    std::uint64_t set_of(InstanceId instance, std::uint64_t line_number) const {
        constexpr std::uint64_t kInstanceColor = 0x9E3779B1ull;
        return (line_number + std::uint64_t{instance} * kInstanceColor) % sets();
    }
};

enum class EventType : std::uint8_t {
    fill,           // line fetched from memory on a miss
    writeback,      // dirty line evicted or drained
    write_through,  // uncached write (cache disabled or bypassed)
    read_through,   // uncached read
};

struct MemoryEvent {
    EventType type;
    InstanceId instance;
    Address addr;
    Bytes bytes;
    MemoryKind region;
    SpaceName space;

    friend bool operator==(const MemoryEvent&, const MemoryEvent&) = default;
};

// Set-associative, write-allocate, write-back cache with LRU replacement.
// Lines are tagged by (instance, line address).
class CacheModel {
public:
    explicit CacheModel(CacheGeometry geometry) : geometry_(geometry) {
        geometry_.validate();
        ways_.resize(geometry_.lines());
    }

    const CacheGeometry& geometry() const { return geometry_; }

    template <class Sink>
    void access(InstanceId instance, Address addr, Bytes len, AccessKind kind, MemoryKind region,
                SpaceName space, Sink&& sink) {
        if (len == 0) return;
        if (!geometry_.enabled()) {
            sink(MemoryEvent{kind == AccessKind::write ? EventType::write_through : EventType::read_through,
                             instance, addr, len, region, space});
            return;
        }
        const Bytes line = geometry_.line;
        const std::uint64_t first = addr / line;
        const std::uint64_t last = (addr + len - 1) / line;
        for (std::uint64_t ln = first; ln <= last; ++ln) {
            touch(instance, ln, kind, region, space, sink);
        }
    }

    template <class Sink>
    void drain(Sink&& sink) {
        for (auto& w : ways_) {
            if (w.valid && w.dirty) {
                w.dirty = false;
                sink(MemoryEvent{EventType::writeback, w.instance, w.line_number * geometry_.line,
                                 geometry_.line, w.region, w.space});
                note_writeback(w.instance, w.region);
            }
        }
    }

    std::uint64_t dirty_lines() const {
        std::uint64_t n = 0;
        for (const auto& w : ways_) n += w.valid && w.dirty;
        return n;
    }

    // Per (instance, region) line ledger: every clean-to-dirty transition is
    // matched by exactly one writeback or is still resident and dirty.
    struct LineLedger {
        std::uint64_t dirtied = 0;
        std::uint64_t written_back = 0;
        std::uint64_t resident_dirty = 0;
    };

    const LineLedger& ledger(InstanceId instance, MemoryKind region) const {
        static const LineLedger empty{};
        const std::size_t k = ledger_key(instance, region);
        return k < ledgers_.size() ? ledgers_[k] : empty;
    }

    void check_ledger(InstanceId instance, MemoryKind region) const {
        const auto& l = ledger(instance, region);
        invariant(l.dirtied == l.written_back + l.resident_dirty, "cache line conservation violated");
    }

private:
    struct Way {
        bool valid = false;
        bool dirty = false;
        MemoryKind region = MemoryKind::dram;
        SpaceName space = SpaceName::boot;
        InstanceId instance = 0;
        std::uint64_t line_number = 0;
        std::uint64_t stamp = 0;
    };

    template <class Sink>
    void touch(InstanceId instance, std::uint64_t ln, AccessKind kind, MemoryKind region, SpaceName space,
               Sink& sink) {
        const std::uint64_t set = geometry_.set_of(instance, ln);
        Way* base = ways_.data() + set * geometry_.ways;
        Way* victim = nullptr;
        for (std::uint32_t i = 0; i < geometry_.ways; ++i) {
            Way& w = base[i];
            if (w.valid && w.line_number == ln && w.instance == instance) {
                w.stamp = ++tick_;
                if (kind == AccessKind::write) {
                    if (!w.dirty) note_dirtied(instance, w.region);
                    w.dirty = true;
                    w.space = space;
                }
                return;
            }
            if (!w.valid) {
                if (victim == nullptr || victim->valid) victim = &w;
            } else if (victim == nullptr || (victim->valid && w.stamp < victim->stamp)) {
                victim = &w;
            }
        }
        if (victim->valid && victim->dirty) {
            sink(MemoryEvent{EventType::writeback, victim->instance, victim->line_number * geometry_.line,
                             geometry_.line, victim->region, victim->space});
            note_writeback(victim->instance, victim->region);
        }
        sink(MemoryEvent{EventType::fill, instance, ln * geometry_.line, geometry_.line, region, space});
        *victim = Way{true, kind == AccessKind::write, region, space, instance, ln, ++tick_};
        if (kind == AccessKind::write) note_dirtied(instance, region);
    }

    static std::size_t ledger_key(InstanceId instance, MemoryKind region) {
        return std::size_t{instance} * kMemoryKindCount + index_of(region);
    }
    LineLedger& ledger_slot(InstanceId instance, MemoryKind region) {
        const std::size_t k = ledger_key(instance, region);
        if (k >= ledgers_.size()) ledgers_.resize(k + 1);
        return ledgers_[k];
    }
    void note_dirtied(InstanceId instance, MemoryKind region) {
        auto& l = ledger_slot(instance, region);
        ++l.dirtied;
        ++l.resident_dirty;
    }
    void note_writeback(InstanceId instance, MemoryKind region) {
        auto& l = ledger_slot(instance, region);
        ++l.written_back;
        --l.resident_dirty;
    }

    CacheGeometry geometry_;
    std::vector<Way> ways_;
    std::vector<LineLedger> ledgers_;
    std::uint64_t tick_ = 0;
};

struct ByteCounts {
    Bytes write = 0;
    Bytes read = 0;
    friend bool operator==(const ByteCounts&, const ByteCounts&) = default;
};

// Byte counters for one instance, indexed by [memory kind][space].
// `memory` is what reached DRAM/PCM; `emitted` is what the runtime issued
// before the cache filtered it.
struct InstanceTraffic {
    using Table = std::array<std::array<ByteCounts, kSpaceCount>, kMemoryKindCount>;
    Table memory{};
    Table emitted{};
    std::uint64_t writebacks = 0;
    std::uint64_t fills = 0;

    Bytes write_bytes(MemoryKind kind) const { return sum(memory, kind, AccessKind::write); }
    Bytes read_bytes(MemoryKind kind) const { return sum(memory, kind, AccessKind::read); }
    Bytes emitted_bytes(MemoryKind kind, AccessKind access) const { return sum(emitted, kind, access); }
    Bytes emitted_total() const {
        Bytes t = 0;
        for (std::size_t k = 0; k < kMemoryKindCount; ++k)
            for (const auto& c : emitted[k]) t += c.write + c.read;
        return t;
    }

    InstanceTraffic minus(const InstanceTraffic& base) const {
        InstanceTraffic out = *this;
        for (std::size_t k = 0; k < kMemoryKindCount; ++k) {
            for (std::size_t s = 0; s < kSpaceCount; ++s) {
                out.memory[k][s].write -= base.memory[k][s].write;
                out.memory[k][s].read -= base.memory[k][s].read;
                out.emitted[k][s].write -= base.emitted[k][s].write;
                out.emitted[k][s].read -= base.emitted[k][s].read;
            }
        }
        out.writebacks -= base.writebacks;
        out.fills -= base.fills;
        return out;
    }

    void add(const InstanceTraffic& other) {
        for (std::size_t k = 0; k < kMemoryKindCount; ++k) {
            for (std::size_t s = 0; s < kSpaceCount; ++s) {
                memory[k][s].write += other.memory[k][s].write;
                memory[k][s].read += other.memory[k][s].read;
                emitted[k][s].write += other.emitted[k][s].write;
                emitted[k][s].read += other.emitted[k][s].read;
            }
        }
        writebacks += other.writebacks;
        fills += other.fills;
    }

private:
    static Bytes sum(const Table& t, MemoryKind kind, AccessKind access) {
        Bytes total = 0;
        for (const auto& c : t[index_of(kind)]) total += access == AccessKind::write ? c.write : c.read;
        return total;
    }
};

class TrafficCounters {
public:
    const InstanceTraffic& instance(InstanceId id) const {
        static const InstanceTraffic empty{};
        return id < per_instance_.size() ? per_instance_[id] : empty;
    }
    InstanceTraffic& mutable_instance(InstanceId id) {
        if (id >= per_instance_.size()) per_instance_.resize(id + 1);
        return per_instance_[id];
    }
    std::size_t instance_count() const { return per_instance_.size(); }

    void record(const MemoryEvent& e) {
        auto& t = mutable_instance(e.instance);
        auto& c = t.memory[index_of(e.region)][index_of(e.space)];
        switch (e.type) {
            case EventType::fill:
                c.read += e.bytes;
                ++t.fills;
                ++fills_;
                break;
            case EventType::writeback:
                c.write += e.bytes;
                ++t.writebacks;
                ++writebacks_;
                break;
            case EventType::write_through: c.write += e.bytes; break;
            case EventType::read_through: c.read += e.bytes; break;
        }
    }

    std::uint64_t writebacks() const { return writebacks_; }
    std::uint64_t fills() const { return fills_; }

private:
    std::vector<InstanceTraffic> per_instance_;
    std::uint64_t writebacks_ = 0;
    std::uint64_t fills_ = 0;
};

// The shared memory system: one LLC in front of DRAM and PCM, plus counters.
class MemoryDevice {
public:
    explicit MemoryDevice(CacheGeometry geometry) : cache_(geometry) {}

    const CacheModel& cache() const { return cache_; }
    const TrafficCounters& counters() const { return counters_; }

    // Optional event tap for tests and tracing.
    void set_event_log(std::vector<MemoryEvent>* log) { log_ = log; }

    void access(InstanceId instance, Address addr, Bytes len, AccessKind kind, MemoryKind region,
                SpaceName space, bool through_cache = true) {
        if (len == 0) return;
        auto& emitted = counters_.mutable_instance(instance).emitted[index_of(region)][index_of(space)];
        (kind == AccessKind::write ? emitted.write : emitted.read) += len;
        auto sink = [this](const MemoryEvent& e) { deliver(e); };
        if (through_cache) {
            cache_.access(instance, addr, len, kind, region, space, sink);
        } else {
            sink(MemoryEvent{kind == AccessKind::write ? EventType::write_through : EventType::read_through,
                             instance, addr, len, region, space});
        }
        if constexpr (kCheckInvariants) {
            if (cache_.geometry().enabled()) cache_.check_ledger(instance, region);
        }
    }

    void drain() {
        cache_.drain([this](const MemoryEvent& e) { deliver(e); });
        if constexpr (kCheckInvariants) check_drained();
    }

    // After a drain no dirty line remains, so every dirtied line has been
    // written back exactly once.
    void check_drained() const {
        invariant(cache_.dirty_lines() == 0, "dirty lines remain after drain");
        for (InstanceId i = 0; i < counters_.instance_count(); ++i) {
            for (MemoryKind k : {MemoryKind::dram, MemoryKind::pcm}) {
                const auto& l = cache_.ledger(i, k);
                invariant(l.dirtied == l.written_back, "dirtied lines not all written back");
            }
        }
    }

private:
    void deliver(const MemoryEvent& e) {
        counters_.record(e);
        if (log_ != nullptr) log_->push_back(e);
    }

    CacheModel cache_;
    TrafficCounters counters_;
    std::vector<MemoryEvent>* log_ = nullptr;
};

// Simulated time: a fixed cost per operation plus a cost per byte touched.
struct SimClock {
    double op_ns = 5.0;
    double byte_ns = 0.25;
    bool include_collector_time = true;
    std::uint64_t ops = 0;
    std::uint64_t bytes = 0;

    double now_ns() const { return static_cast<double>(ops) * op_ns + static_cast<double>(bytes) * byte_ns; }
    double now_seconds() const { return now_ns() * 1e-9; }
    void advance(std::uint64_t op_count, std::uint64_t byte_count) {
        ops += op_count;
        bytes += byte_count;
    }
};

inline double pcm_write_rate(Bytes pcm_write_bytes, double elapsed_seconds) {
    if (!(elapsed_seconds > 0.0)) throw UndefinedRate("write rate is undefined over zero elapsed time");
    return static_cast<double>(pcm_write_bytes) / elapsed_seconds;
}

inline double pcm_write_rate(const InstanceTraffic& traffic, const SimClock& clock) {
    return pcm_write_rate(traffic.write_bytes(MemoryKind::pcm), clock.now_seconds());
}

struct LifetimeModel {
    double capacity_bytes = 32e9;
    double endurance = 1e7;
    double efficiency = 0.5;

    void validate() const {
        if (!(capacity_bytes > 0) || !(endurance > 0)) throw ConfigError("lifetime parameters must be positive");
        if (!(efficiency > 0) || efficiency > 1) throw ConfigError("wear-leveling efficiency must lie in (0, 1]");
    }
};

inline constexpr double kSecondsPerYear = 365.25 * 24 * 3600;
// Reported for a zero write rate, and the ceiling for any finite lifetime.
inline constexpr double kUnboundedLifetimeYears = 1e9;

inline double lifetime_years(const LifetimeModel& model, double write_rate) {
    model.validate();
    if (write_rate < 0 || std::isnan(write_rate)) throw DomainError("write rate must be non-negative");
    if (write_rate == 0) return kUnboundedLifetimeYears;
    const double years = model.capacity_bytes * model.endurance * model.efficiency / (write_rate * kSecondsPerYear);
    return std::min(years, kUnboundedLifetimeYears);
}

}  // namespace wrsim

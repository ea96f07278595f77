#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <random>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "wrsim/wrsim.hpp"

namespace wrsim::testing {

// Straightforward LRU cache: one MRU-ordered list per set, searched
// linearly. Shares nothing with CacheModel except the event vocabulary and
// the documented set-index formula.
class ReferenceCache {
public:
    ReferenceCache(std::uint64_t sets, std::uint32_t ways, Bytes line) : sets_(sets), ways_(ways), line_(line) {
        if (sets_ > 0) lists_.resize(sets_);
    }

    void access(InstanceId inst, Address addr, Bytes len, AccessKind kind, MemoryKind region, SpaceName space,
                std::vector<MemoryEvent>& out) {
        if (len == 0) return;
        if (sets_ == 0) {
            out.push_back({kind == AccessKind::write ? EventType::write_through : EventType::read_through, inst, addr,
                           len, region, space});
            return;
        }
        for (Address ln = addr / line_; ln <= (addr + len - 1) / line_; ++ln) {
            auto& lst = lists_[(ln + std::uint64_t{inst} * 0x9E3779B1ull) % sets_];
            auto it = lst.begin();
            while (it != lst.end() && !(it->inst == inst && it->line == ln)) ++it;
            if (it != lst.end()) {
                Entry e = *it;
                lst.erase(it);
                if (kind == AccessKind::write) {
                    e.dirty = true;
                    e.space = space;
                }
                lst.push_front(e);
                continue;
            }
            if (lst.size() == ways_) {
                const Entry& v = lst.back();
                if (v.dirty) out.push_back({EventType::writeback, v.inst, v.line * line_, line_, v.region, v.space});
                lst.pop_back();
            }
            out.push_back({EventType::fill, inst, ln * line_, line_, region, space});
            lst.push_front({inst, ln, kind == AccessKind::write, region, space});
        }
    }

    // Dirty lines in an unspecified order; compare as a multiset.
    void drain(std::vector<MemoryEvent>& out) {
        for (auto& lst : lists_) {
            for (auto& e : lst) {
                if (e.dirty) out.push_back({EventType::writeback, e.inst, e.line * line_, line_, e.region, e.space});
                e.dirty = false;
            }
        }
    }

private:
    struct Entry {
        InstanceId inst;
        std::uint64_t line;
        bool dirty;
        MemoryKind region;
        SpaceName space;
    };
    std::uint64_t sets_;
    std::uint32_t ways_;
    Bytes line_;
    std::vector<std::list<Entry>> lists_;
};

inline CacheGeometry geometry(std::uint64_t sets, std::uint32_t ways, Bytes line = 64) {
    return CacheGeometry{sets * ways * line, ways, line};
}

// Drives CacheModel and ReferenceCache with the same random accesses and
// reports the index of the first diverging event, or -1.
inline long long cache_divergence(std::uint64_t sets, std::uint32_t ways, std::uint64_t seed, std::size_t accesses) {
    const Bytes line = 64;
    CacheModel model(geometry(sets, ways, line));
    ReferenceCache ref(sets, ways, line);
    std::mt19937_64 rng(seed);
    std::vector<MemoryEvent> got, want;
    const Address span = 64 * line * (sets * ways + 2);
    for (std::size_t i = 0; i < accesses; ++i) {
        const auto inst = static_cast<InstanceId>(rng() % 3);
        const Address addr = rng() % span;
        const Bytes len = 1 + rng() % (rng() % 4 == 0 ? 3 * line : 16);
        const AccessKind kind = rng() % 2 ? AccessKind::write : AccessKind::read;
        const MemoryKind region = rng() % 2 ? MemoryKind::pcm : MemoryKind::dram;
        const SpaceName space = kAllSpaces[rng() % kSpaceCount];
        model.access(inst, addr, len, kind, region, space, [&](const MemoryEvent& e) { got.push_back(e); });
        ref.access(inst, addr, len, kind, region, space, want);
        if (got.size() != want.size()) return static_cast<long long>(std::min(got.size(), want.size()));
    }
    for (std::size_t k = 0; k < got.size(); ++k)
        if (!(got[k] == want[k])) return static_cast<long long>(k);
    std::vector<MemoryEvent> gd, wd;
    model.drain([&](const MemoryEvent& e) { gd.push_back(e); });
    ref.drain(wd);
    auto key = [](const MemoryEvent& e) { return std::tuple(e.instance, e.addr, e.region, e.space); };
    auto by_key = [&](const MemoryEvent& a, const MemoryEvent& b) { return key(a) < key(b); };
    std::sort(gd.begin(), gd.end(), by_key);
    std::sort(wd.begin(), wd.end(), by_key);
    if (gd != wd) return static_cast<long long>(got.size());
    return -1;
}

// ---- independent graph model for collector oracles --------------------------

struct GraphModel {
    std::unordered_map<ObjectId, std::vector<ObjectId>> slots;
    std::unordered_set<ObjectId> roots;

    std::unordered_set<ObjectId> reachable_from(const std::vector<ObjectId>& seeds,
                                                const std::function<bool(ObjectId)>& through = {}) const {
        std::unordered_set<ObjectId> seen;
        std::deque<ObjectId> work;
        auto visit = [&](ObjectId id) {
            if (id == 0 || !slots.count(id) || seen.count(id)) return;
            if (through && !through(id)) return;
            seen.insert(id);
            work.push_back(id);
        };
        for (ObjectId id : seeds) visit(id);
        while (!work.empty()) {
            const ObjectId id = work.front();
            work.pop_front();
            for (ObjectId c : slots.at(id)) visit(c);
        }
        return seen;
    }

    std::unordered_set<ObjectId> reachable() const {
        return reachable_from(std::vector<ObjectId>(roots.begin(), roots.end()));
    }
};


// Small heap geometry for fast collector tests.
inline HeapOptions small_heap_options() {
    HeapOptions o;
    o.heap_size = 256 * MiB;
    o.chunk_size = 64 * KiB;
    o.boot_bytes = 64 * KiB;
    return o;
}

struct Rig {
    MemoryDevice device;
    Instance instance;
    std::vector<MemoryEvent> log;

    Rig(Variant v, CacheGeometry g = CacheGeometry{0, 16, 64}, Bytes nursery = 64 * KiB, Bytes budget = 4 * MiB,
        Bytes large_threshold = 8 * KiB, HeapOptions options = small_heap_options())
        : device(g), instance(config(v, nursery, budget, large_threshold), options, device, 0) {
        device.set_event_log(&log);
    }

    static CollectorConfig config(Variant v, Bytes nursery, Bytes budget, Bytes large_threshold) {
        CollectorConfig c = make_collector_config(v, nursery, budget);
        c.large_threshold = large_threshold;
        return c;
    }

    Heap& heap() { return instance.heap(); }
    const ObjectRecord& obj(ObjectId id) { return heap().get(id); }
};

struct OracleResult {
    std::size_t minors = 0;
    std::size_t observers = 0;
    std::size_t majors = 0;
    std::size_t objects = 0;
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }
};

// Checks every collection against reachability computed on the test's own
// graph model. Young survivors of a minor or observer collection must equal
// the closure, through young objects, of the roots and the targets of all
// old-to-young edges; a major collection must keep exactly what the roots
// reach.
class ReachabilityOracle : public CollectionListener {
public:
    ReachabilityOracle(GraphModel& model, OracleResult& result) : model_(model), result_(result) {}

    void before(CollectionKind kind, const Heap& heap) override {
        Frame f;
        f.kind = kind;
        for (const auto& [id, r] : heap.objects()) {
            f.entry[id] = heap.is_young(r.addr) ? r.space : SpaceName::mature_pcm;
        }
        std::vector<ObjectId> seeds(model_.roots.begin(), model_.roots.end());
        for (const auto& [id, slots] : model_.slots) {
            const ObjectRecord* src = heap.find(id);
            if (src == nullptr || heap.is_young(src->addr)) continue;
            for (std::uint32_t s = 0; s < slots.size(); ++s) {
                const ObjectRecord* child = slots[s] == 0 ? nullptr : heap.find(slots[s]);
                if (child == nullptr || !heap.is_young(child->addr)) continue;
                seeds.push_back(slots[s]);
                if (kind != CollectionKind::major && !heap.remembered_set().count({id, s})) {
                    fail("old-to-young edge " + std::to_string(id) + "." + std::to_string(s) +
                         " missing from the remembered set");
                }
            }
        }
        f.young_live = model_.reachable_from(seeds, [&](ObjectId id) {
            const ObjectRecord* r = heap.find(id);
            return r != nullptr && heap.is_young(r->addr);
        });
        f.all_live = model_.reachable();
        stack_.push_back(std::move(f));
    }

    void after(CollectionKind kind, const Heap& heap, const CollectionStats& stats) override {
        Frame f = std::move(stack_.back());
        stack_.pop_back();
        if (stats.total_copied() > stats.bytes_live_at_entry) fail("copied more bytes than were live");
        switch (kind) {
            case CollectionKind::major:
                ++result_.majors;
                for (Frame& outer : stack_) outer.major_ran = true;
                for (const auto& [id, where] : f.entry) {
                    if (heap.contains(id) != (f.all_live.count(id) > 0)) {
                        fail("major: object " + std::to_string(id) + (heap.contains(id) ? " retained" : " lost"));
                    }
                }
                break;
            case CollectionKind::observer:
                ++result_.observers;
                if (!stack_.empty()) stack_.back().observer_ran = true;
                check_young(heap, f, SpaceName::observer, true);
                check_young(heap, f, SpaceName::nursery, false);
                break;
            case CollectionKind::minor:
                ++result_.minors;
                check_young(heap, f, SpaceName::nursery, true);
                check_young(heap, f, SpaceName::observer, f.observer_ran);
                break;
        }
        if (kind != CollectionKind::major && !f.major_ran) {
            for (const auto& [id, where] : f.entry) {
                if (where == SpaceName::mature_pcm && !heap.contains(id)) {
                    fail("young collection reclaimed old object " + std::to_string(id));
                }
            }
        }
        for (const auto& [id, r] : heap.objects()) {
            if (!heap.space_map().contains(r.space)) fail("object in a space absent from the map");
        }
        for (auto it = model_.slots.begin(); it != model_.slots.end();) {
            if (heap.contains(it->first)) {
                ++it;
                continue;
            }
            if (f.all_live.count(it->first)) fail("reachable object " + std::to_string(it->first) + " reclaimed");
            model_.roots.erase(it->first);
            it = model_.slots.erase(it);
        }
    }

private:
    struct Frame {
        CollectionKind kind;
        std::unordered_map<ObjectId, SpaceName> entry;
        std::unordered_set<ObjectId> young_live;
        std::unordered_set<ObjectId> all_live;
        bool observer_ran = false;
        bool major_ran = false;  // a cascaded major may reclaim floating garbage
    };

    // Objects that were in `space` at entry: if collected, survivors must be
    // exactly the young closure; otherwise all must still exist.
    void check_young(const Heap& heap, const Frame& f, SpaceName space, bool collected) {
        for (const auto& [id, where] : f.entry) {
            if (where != space) continue;
            bool expected = collected ? f.young_live.count(id) > 0 : true;
            if (f.major_ran) expected = expected && f.all_live.count(id) > 0;
            if (heap.contains(id) != expected) {
                fail(std::string(to_string(f.kind)) + ": " + std::string(to_string(space)) + " object " +
                     std::to_string(id) + (heap.contains(id) ? " retained" : " lost"));
            }
        }
    }

    void fail(std::string what) {
        if (result_.failures.size() < 20) result_.failures.push_back(std::move(what));
    }

    GraphModel& model_;
    OracleResult& result_;
    std::vector<Frame> stack_;
};

// Random mutator that only touches objects reachable from its roots, as a
// real program would. Stops after `max_objects` allocations.
inline OracleResult run_gc_oracle(Variant variant, std::uint64_t seed, std::size_t max_objects = 10'000) {
    Rig rig(variant, CacheGeometry{64 * KiB, 8, 64}, 64 * KiB, 4 * MiB, 4 * KiB);
    GraphModel model;
    OracleResult result;
    ReachabilityOracle oracle(model, result);
    rig.heap().set_listener(&oracle);
    Instance& inst = rig.instance;
    std::mt19937_64 rng(seed);
    std::deque<ObjectId> window;
    std::vector<ObjectId> live;
    bool stale = true;
    auto reachable = [&]() -> const std::vector<ObjectId>& {
        if (stale) {
            const auto set = model.reachable();
            live.assign(set.begin(), set.end());
            std::sort(live.begin(), live.end());
            stale = false;
        }
        return live;
    };
    auto pick = [&]() -> ObjectId {
        const auto& l = reachable();
        return l.empty() ? 0 : l[rng() % l.size()];
    };
    ObjectId next = 1;
    try {
        while (next <= max_objects) {
            const auto r = rng() % 100;
            if (r < 35) {
                const bool large = rng() % 10 == 0;
                const Bytes size = large ? 4 * KiB + rng() % (36 * KiB) : 16 + rng() % 200;
                const auto refs = static_cast<std::uint32_t>(rng() % (large ? 3 : 5));
                const ObjectId id = next++;
                inst.alloc_object(id, size, refs, false);
                model.slots[id].assign(refs, 0);
                inst.set_root(id, true);
                model.roots.insert(id);
                window.push_back(id);
                if (window.size() > 16) {
                    const ObjectId old = window.front();
                    window.pop_front();
                    if (model.roots.count(old) && rng() % 8 != 0) {
                        inst.set_root(old, false);
                        model.roots.erase(old);
                    }
                }
                stale = true;
            } else if (r < 60) {
                const ObjectId parent = pick();
                if (parent == 0 || model.slots[parent].empty()) continue;
                const ObjectId child = rng() % 10 == 0 ? 0 : pick();
                const auto slot = static_cast<std::uint32_t>(rng() % model.slots[parent].size());
                inst.write_ref(parent, slot, child);
                model.slots[parent][slot] = child;
                stale = true;
            } else if (r < 88) {
                const ObjectId id = pick();
                if (id == 0) continue;
                const Bytes size = inst.heap().get(id).size;
                const Bytes len = 1 + rng() % std::min<Bytes>(size, 128);
                const Bytes off = rng() % (size - len + 1);
                if (r < 80) inst.write_data(id, off, len);
                else inst.read_data(id, off, len);
            } else if (r < 97) {
                if (model.roots.empty()) continue;
                std::vector<ObjectId> roots(model.roots.begin(), model.roots.end());
                std::sort(roots.begin(), roots.end());
                const ObjectId id = roots[rng() % roots.size()];
                inst.set_root(id, false);
                model.roots.erase(id);
                stale = true;
            } else if (r < 99) {
                inst.collect_major();
                stale = true;
            } else if (inst.heap().config().has_observer()) {
                inst.collect_observer();
                stale = true;
            } else {
                inst.collect_minor();
                stale = true;
            }
        }
    } catch (const std::exception& e) {
        result.failures.push_back(std::string("exception: ") + e.what());
    }
    rig.heap().set_listener(nullptr);
    result.objects = next - 1;
    return result;
}

}  // namespace wrsim::testing

#pragma once

#include <deque>
#include <stdexcept>
#include <vector>

#include "wrsim/heap.hpp"

namespace wrsim {

enum class SurvivorPhase : std::uint8_t { minor, observer };

class CollectorLogicError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Where a survivor of the given phase goes.
//  - PCM-Only and the KG-N/KG-B family promote straight to the PCM mature space.
//  - KG-W family: minor survivors enter the observer; observer survivors go to
//    PCM if they were never written while observed, otherwise to DRAM.
inline SpaceName route_survivor(const CollectorConfig& config, const ObjectRecord& obj, SurvivorPhase phase) {
    if (phase == SurvivorPhase::observer) {
        if (!is_kg_w_family(config.variant)) {
            throw CollectorLogicError("observer phase requested for " + std::string(to_string(config.variant)));
        }
        return obj.write_count == 0 ? SpaceName::mature_pcm : SpaceName::mature_dram;
    }
    return is_kg_w_family(config.variant) ? SpaceName::observer : SpaceName::mature_pcm;
}

enum class LargePlacement : std::uint8_t { nursery, los };

// Large objects small enough relative to the nursery are given a chance to
// die young.
inline LargePlacement loo_admit(const CollectorConfig& config, Bytes size, Bytes nursery_free) {
    if (!config.loo) return LargePlacement::los;
    const auto cap = static_cast<Bytes>(config.loo_fraction * static_cast<double>(config.nursery_size));
    return size <= cap && size <= nursery_free ? LargePlacement::nursery : LargePlacement::los;
}

CollectionStats major_collect(Heap& heap);

namespace detail {

// Large objects keep living in a large-object space once promoted.
inline SpaceName promotion_space(SpaceName mature, bool large) {
    if (!large) return mature;
    if (mature == SpaceName::mature_pcm) return SpaceName::los_pcm;
    if (mature == SpaceName::mature_dram) return SpaceName::los_dram;
    return mature;
}

inline bool is_free_list_space(SpaceName s) {
    return s == SpaceName::mature_dram || s == SpaceName::mature_pcm || s == SpaceName::los_dram ||
           s == SpaceName::los_pcm;
}

// Destination allocation for copying. Running out of chunks triggers one
// full-heap collection before giving up.
inline Address allocate_destination(Heap& heap, SpaceName dest, Bytes size, bool& cascaded) {
    if (dest == SpaceName::observer) {
        auto a = heap.bump(SpaceName::observer, size);
        if (!a) throw HeapExhausted("observer space overflow");
        return *a;
    }
    try {
        return heap.allocate_free_list(dest, size);
    } catch (const OutOfChunks&) {
        if (cascaded) throw HeapExhausted("out of chunks while copying survivors");
        cascaded = true;
        major_collect(heap);
        try {
            return heap.allocate_free_list(dest, size);
        } catch (const OutOfChunks&) {
            throw HeapExhausted("out of chunks while copying survivors");
        }
    }
}

inline void copy_object(Heap& heap, ObjectRecord& obj, SpaceName dest, CollectionStats& stats, bool& cascaded) {
    const Address to = allocate_destination(heap, dest, obj.size, cascaded);
    heap.emit(obj.addr, obj.size, AccessKind::read, obj.space, TrafficSource::collector);
    heap.emit(to, obj.size, AccessKind::write, dest, TrafficSource::collector);
    if (is_free_list_space(obj.space)) heap.free_extent(obj.space, obj.addr, obj.size);
    obj.forwarded_to = to;
    obj.addr = to;
    obj.space = dest;
    obj.forwarded_to.reset();
    obj.write_count = 0;
    stats.bytes_copied[index_of(dest)] += obj.size;
    if (dest == SpaceName::observer) heap.note_observer_resident(obj.id);
}

// Transitive closure over roots and remembered-set referents, restricted to
// the young region. Returns the survivors in discovery order with their
// `survivor` flag set.
inline std::vector<ObjectId> trace_young(Heap& heap) {
    std::vector<ObjectId> order;
    std::deque<ObjectId> work;
    auto visit = [&](ObjectId id) {
        if (id == 0) return;
        ObjectRecord* r = heap.find(id);
        if (r == nullptr || r->survivor || !heap.is_young(r->addr)) return;
        r->survivor = true;
        order.push_back(id);
        work.push_back(id);
    };
    for (ObjectId id : heap.roots()) visit(id);
    for (const auto& e : heap.remembered_set()) {
        const ObjectRecord* src = heap.find(e.object);
        if (src != nullptr && e.slot < src->ref_slots.size()) visit(src->ref_slots[e.slot]);
    }
    while (!work.empty()) {
        const ObjectRecord& r = heap.get(work.front());
        work.pop_front();
        for (ObjectId child : r.ref_slots) visit(child);
    }
    return order;
}

inline void clear_survivor_flags(Heap& heap, const std::vector<ObjectId>& ids) {
    for (ObjectId id : ids)
        if (auto* r = heap.find(id)) r->survivor = false;
}

// Records old-to-young references held by objects that just left the young region.
inline void remember_young_refs(Heap& heap, const std::vector<ObjectId>& promoted) {
    for (ObjectId id : promoted) {
        const ObjectRecord* r = heap.find(id);
        if (r == nullptr || heap.is_young(r->addr)) continue;
        for (std::uint32_t slot = 0; slot < r->ref_slots.size(); ++slot) {
            const ObjectRecord* child = r->ref_slots[slot] == 0 ? nullptr : heap.find(r->ref_slots[slot]);
            if (child != nullptr && heap.is_young(child->addr)) {
                heap.mutable_remembered_set().insert({id, slot});
            }
        }
    }
}

inline void prune_remembered_set(Heap& heap) {
    auto& rs = heap.mutable_remembered_set();
    for (auto it = rs.begin(); it != rs.end();) {
        const ObjectRecord* src = heap.find(it->object);
        bool keep = src != nullptr && !heap.is_young(src->addr) && it->slot < src->ref_slots.size();
        if (keep) {
            const ObjectRecord* child = heap.find(src->ref_slots[it->slot]);
            keep = child != nullptr && heap.is_young(child->addr);
        }
        it = keep ? std::next(it) : rs.erase(it);
    }
}

// Evacuates the observer: live observer objects are routed by their write
// count, dead ones reclaimed. Expects survivor flags from trace_young.
inline CollectionStats evacuate_observer(Heap& heap, bool& cascaded) {
    if (auto* l = heap.listener()) l->before(CollectionKind::observer, heap);
    CollectionStats stats;
    stats.kind = CollectionKind::observer;
    const std::vector<ObjectId> residents = heap.observer_objects();
    std::vector<ObjectId> promoted;
    for (ObjectId id : residents) {
        ObjectRecord* r = heap.find(id);
        if (r == nullptr || r->space != SpaceName::observer) continue;
        ++stats.objects_scanned;
        if (!r->survivor) {
            heap.erase_object(id);
            ++stats.objects_reclaimed;
            continue;
        }
        stats.bytes_live_at_entry += r->size;
        const SpaceName dest =
            promotion_space(route_survivor(heap.config(), *r, SurvivorPhase::observer), r->large);
        copy_object(heap, *r, dest, stats, cascaded);
        promoted.push_back(id);
    }
    heap.reset_contiguous(SpaceName::observer);
    remember_young_refs(heap, promoted);
    heap.record(stats);
    if (auto* l = heap.listener()) l->after(CollectionKind::observer, heap, stats);
    return stats;
}

inline void verify_if_checking(const Heap& heap) {
    if constexpr (kCheckInvariants) heap.verify();
}

}  // namespace detail

// Collects the nursery. Under KG-W the observer is evacuated first when it
// cannot absorb the nursery survivors.
inline CollectionStats minor_collect(Heap& heap) {
    if (auto* l = heap.listener()) l->before(CollectionKind::minor, heap);
    CollectionStats stats;
    stats.kind = CollectionKind::minor;
    bool cascaded = false;

    const std::vector<ObjectId> live = detail::trace_young(heap);
    stats.objects_scanned = live.size();
    std::vector<ObjectId> survivors;
    Bytes survivor_bytes = 0;
    for (ObjectId id : live) {
        const ObjectRecord& r = heap.get(id);
        stats.bytes_live_at_entry += r.size;
        if (r.space == SpaceName::nursery) {
            survivors.push_back(id);
            survivor_bytes += r.size;
        }
    }

    if (heap.config().has_observer() && heap.observer().free() < survivor_bytes) {
        detail::evacuate_observer(heap, cascaded);
    }

    std::vector<ObjectId> promoted;
    for (ObjectId id : survivors) {
        ObjectRecord* r = heap.find(id);
        if (r == nullptr || r->space != SpaceName::nursery) continue;  // reclaimed by a cascaded major
        const SpaceName dest =
            detail::promotion_space(route_survivor(heap.config(), *r, SurvivorPhase::minor), r->large);
        detail::copy_object(heap, *r, dest, stats, cascaded);
        if (!heap.is_young(r->addr)) promoted.push_back(id);
    }

    const std::vector<ObjectId> residents = heap.nursery_objects();
    for (ObjectId id : residents) {
        const ObjectRecord* r = heap.find(id);
        if (r != nullptr && r->space == SpaceName::nursery) {
            heap.erase_object(id);
            ++stats.objects_reclaimed;
        }
    }
    heap.reset_contiguous(SpaceName::nursery);
    detail::clear_survivor_flags(heap, live);
    detail::remember_young_refs(heap, promoted);
    detail::prune_remembered_set(heap);
    heap.record(stats);
    detail::verify_if_checking(heap);
    if (auto* l = heap.listener()) l->after(CollectionKind::minor, heap, stats);
    return stats;
}

// Stand-alone observer collection: traces the young region and evacuates
// the observer without touching the nursery.
inline CollectionStats observer_collect(Heap& heap) {
    if (!heap.config().has_observer()) {
        throw CollectorLogicError("observer collection requested for " +
                                  std::string(to_string(heap.config().variant)));
    }
    bool cascaded = false;
    const std::vector<ObjectId> live = detail::trace_young(heap);
    CollectionStats stats = detail::evacuate_observer(heap, cascaded);
    detail::clear_survivor_flags(heap, live);
    detail::prune_remembered_set(heap);
    detail::verify_if_checking(heap);
    return stats;
}

// Full-heap mark-sweep. Young objects that are live stay where they are;
// everything unreachable is reclaimed.
inline CollectionStats major_collect(Heap& heap) {
    if (auto* l = heap.listener()) l->before(CollectionKind::major, heap);
    CollectionStats stats;
    stats.kind = CollectionKind::major;
    const CollectorConfig& config = heap.config();
    const Bytes line = heap.options().line_size;

    std::vector<ObjectId> live;
    std::deque<ObjectId> work;
    auto visit = [&](ObjectId id) {
        if (id == 0) return;
        ObjectRecord* r = heap.find(id);
        invariant(r != nullptr, "live object references a reclaimed object");
        if (r->mark) return;
        r->mark = true;
        live.push_back(id);
        work.push_back(id);
    };
    for (ObjectId id : heap.roots()) visit(id);
    while (!work.empty()) {
        const ObjectRecord& r = heap.get(work.front());
        work.pop_front();
        for (ObjectId child : r.ref_slots) visit(child);
    }
    stats.objects_scanned = live.size();

    // Marking writes the mark state: inline in the object's header, or in
    // the DRAM side table when PCM metadata is kept in DRAM.
    for (ObjectId id : live) {
        const ObjectRecord& r = heap.get(id);
        stats.bytes_live_at_entry += r.size;
        if (!detail::is_free_list_space(r.space)) continue;
        const bool in_pcm = heap.memory_of(r.space) == MemoryKind::pcm;
        if (config.mdo && in_pcm) {
            heap.emit(heap.meta_shadow_line(r.addr), line, AccessKind::write, SpaceName::meta_dram,
                      TrafficSource::collector);
        } else {
            heap.emit(align_down(r.addr, line), line, AccessKind::write, r.space, TrafficSource::collector);
        }
        ++stats.mark_writes;
        if (in_pcm) ++stats.pcm_object_marks;
    }

    std::vector<ObjectId> dead;
    for (const auto& [id, r] : heap.objects())
        if (!r.mark) dead.push_back(id);
    for (ObjectId id : dead) {
        const ObjectRecord& r = heap.get(id);
        if (detail::is_free_list_space(r.space)) heap.free_extent(r.space, r.addr, r.size);
        heap.erase_object(id);
    }
    stats.objects_reclaimed = dead.size();
    heap.drop_missing_young();

    // Highly written PCM large objects move to DRAM; the rest start a new
    // write-count window.
    const bool relocate = config.loo && heap.space_map().contains(SpaceName::los_dram);
    bool cascaded = true;  // relocation never triggers another collection
    for (ObjectId id : live) {
        ObjectRecord& r = heap.get(id);
        r.mark = false;
        if (r.space != SpaceName::los_pcm) continue;
        if (relocate && r.write_count >= config.large_relocation_threshold) {
            try {
                detail::copy_object(heap, r, SpaceName::los_dram, stats, cascaded);
                ++stats.large_relocated;
            } catch (const HeapExhausted&) {
                r.write_count = 0;
            }
        } else {
            r.write_count = 0;
        }
    }

    detail::prune_remembered_set(heap);
    heap.record(stats);
    detail::verify_if_checking(heap);
    if (auto* l = heap.listener()) l->after(CollectionKind::major, heap, stats);
    if (heap.mature_occupancy() > config.heap_budget) {
        throw HeapExhausted("live mature data (" + std::to_string(heap.mature_occupancy()) +
                            " bytes) exceeds the heap budget");
    }
    return stats;
}

}  // namespace wrsim

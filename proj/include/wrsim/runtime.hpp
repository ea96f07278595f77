#pragma once

#include "wrsim/collectors.hpp"
#include "wrsim/heap.hpp"
#include "wrsim/memory_device.hpp"

namespace wrsim {

// One managed-runtime instance: a heap, its collectors, and a simulated
// clock. All mutator entry points advance the clock; collections charge
// their scanning and copying to it when collector time is included.
class Instance {
public:
    Instance(const CollectorConfig& config, const HeapOptions& options, MemoryDevice& device, InstanceId id,
             SimClock clock = {})
        : heap_(config, options, device, id), clock_(clock) {}

    Heap& heap() { return heap_; }
    const Heap& heap() const { return heap_; }
    const SimClock& clock() const { return clock_; }
    InstanceId id() const { return heap_.instance(); }

    // Returns the space the object was placed in.
    SpaceName alloc_object(ObjectId id, Bytes size, std::uint32_t n_refs, bool large_hint) {
        if (id == 0) throw TraceError("object id 0 is reserved for null");
        if (size == 0) throw TraceError("zero-sized allocation");
        if (heap_.contains(id)) throw TraceError("object id " + std::to_string(id) + " allocated twice");
        const CollectorConfig& config = heap_.config();
        const Bytes bytes = heap_.object_size(size, n_refs);
        const bool large = large_hint || bytes >= config.large_threshold;

        SpaceName space = SpaceName::nursery;
        Address addr = 0;
        if (large && loo_admit(config, bytes, heap_.nursery().free()) == LargePlacement::los) {
            space = SpaceName::los_pcm;
            addr = allocate_large(bytes);
        } else if (large) {
            addr = *heap_.bump(SpaceName::nursery, bytes);
        } else {
            if (bytes > heap_.nursery().capacity()) {
                throw AllocationFailure("object of " + std::to_string(bytes) + " bytes exceeds the nursery");
            }
            auto a = heap_.bump(SpaceName::nursery, bytes);
            if (!a) {
                collect_young();
                a = heap_.bump(SpaceName::nursery, bytes);
                if (!a) throw AllocationFailure("nursery cannot satisfy the allocation after collection");
            }
            addr = *a;
        }
        heap_.create_object(id, addr, bytes, n_refs, large, space);
        if (heap_.options().zeroing) heap_.emit(addr, bytes, AccessKind::write, space, TrafficSource::allocation);
        clock_.advance(1, bytes);
        account_collections();
        return space;
    }

    void write_ref(ObjectId parent, std::uint32_t slot, ObjectId child) {
        heap_.write_ref(parent, slot, child);
        clock_.advance(1, heap_.options().slot_size);
    }

    void write_data(ObjectId id, Bytes offset, Bytes len) {
        heap_.write_data(id, offset, len);
        clock_.advance(1, len);
    }

    void read_data(ObjectId id, Bytes offset, Bytes len) {
        heap_.read_data(id, offset, len);
        clock_.advance(1, len);
    }

    void set_root(ObjectId id, bool rooted) {
        heap_.set_root(id, rooted);
        clock_.advance(1, 0);
    }

    // Nursery collection followed by a full-heap collection when the mature
    // occupancy reaches the budget.
    void collect_young() {
        minor_collect(heap_);
        if (heap_.mature_occupancy() >= heap_.config().heap_budget) major_collect(heap_);
        account_collections();
    }

    CollectionStats collect_minor() { return charge(minor_collect(heap_)); }
    CollectionStats collect_observer() { return charge(observer_collect(heap_)); }
    CollectionStats collect_major() { return charge(major_collect(heap_)); }

private:
    Address allocate_large(Bytes bytes) {
        if (heap_.mature_occupancy() + bytes > heap_.config().heap_budget) major_collect(heap_);
        try {
            return heap_.allocate_free_list(SpaceName::los_pcm, bytes);
        } catch (const OutOfChunks&) {
            major_collect(heap_);
            try {
                return heap_.allocate_free_list(SpaceName::los_pcm, bytes);
            } catch (const OutOfChunks&) {
                throw HeapExhausted("no PCM chunks left for a " + std::to_string(bytes) + "-byte large object");
            }
        }
    }

    CollectionStats charge(CollectionStats s) {
        account_collections();
        return s;
    }

    void account_collections() {
        const auto& log = heap_.collection_log();
        for (; accounted_ < log.size(); ++accounted_) {
            if (!clock_.include_collector_time) continue;
            const auto& s = log[accounted_];
            clock_.advance(s.objects_scanned, s.total_copied() + s.mark_writes * heap_.options().line_size);
        }
    }

    Heap heap_;
    SimClock clock_;
    std::size_t accounted_ = 0;
};

}  // namespace wrsim

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "wrsim/address_space.hpp"
#include "wrsim/common.hpp"
#include "wrsim/memory_device.hpp"
#include "wrsim/spaces.hpp"

namespace wrsim {

struct ObjectRecord {
    ObjectId id = 0;
    Address addr = 0;
    Bytes size = 0;
    SpaceName space = SpaceName::nursery;
    std::vector<ObjectId> ref_slots;
    std::uint64_t write_count = 0;
    bool mark = false;
    bool large = false;
    std::optional<Address> forwarded_to;
    bool survivor = false;  // scratch flag of the young-generation trace
};

struct RememberedEntry {
    ObjectId object;
    std::uint32_t slot;
    friend bool operator==(const RememberedEntry&, const RememberedEntry&) = default;
};

struct RememberedEntryHash {
    std::size_t operator()(const RememberedEntry& e) const noexcept {
        return std::hash<std::uint64_t>{}(e.object * 0x9E3779B97F4A7C15ull ^ e.slot);
    }
};

using RootSet = std::unordered_set<ObjectId>;
using RememberedSet = std::unordered_set<RememberedEntry, RememberedEntryHash>;

enum class TrafficSource : std::uint8_t { allocation, mutator, collector };

enum class CollectionKind : std::uint8_t { minor, observer, major };

inline constexpr std::string_view to_string(CollectionKind k) {
    switch (k) {
        case CollectionKind::minor: return "minor";
        case CollectionKind::observer: return "observer";
        case CollectionKind::major: return "major";
    }
    return "?";
}

struct CollectionStats {
    CollectionKind kind = CollectionKind::minor;
    bool measured = true;
    std::array<Bytes, kSpaceCount> bytes_copied{};
    Bytes bytes_live_at_entry = 0;
    std::uint64_t objects_scanned = 0;
    std::uint64_t objects_reclaimed = 0;
    std::uint64_t mark_writes = 0;
    std::uint64_t pcm_object_marks = 0;
    std::uint64_t large_relocated = 0;

    Bytes total_copied() const {
        Bytes t = 0;
        for (Bytes b : bytes_copied) t += b;
        return t;
    }
};

class Heap;

// Test and tracing hook around every collection.
class CollectionListener {
public:
    virtual ~CollectionListener() = default;
    virtual void before(CollectionKind, const Heap&) {}
    virtual void after(CollectionKind, const Heap&, const CollectionStats&) {}
};

struct HeapOptions {
    Bytes heap_size = 2 * GiB;
    Bytes chunk_size = 4 * MiB;
    Bytes boot_bytes = 4 * MiB;
    Bytes header_size = 16;
    Bytes slot_size = 8;
    Bytes line_size = 64;
    bool zeroing = true;
    bool collector_through_cache = true;
};

struct ContiguousSpace {
    Address start = 0;
    Address limit = 0;
    Address cursor = 0;

    Bytes capacity() const { return limit - start; }
    Bytes free() const { return limit - cursor; }
    Bytes used() const { return cursor - start; }
    bool contains(Address a) const { return a >= start && a < limit; }
};

struct FreeListSpace {
    std::map<Address, Bytes> holes;              // address-ordered, coalesced
    std::set<std::pair<Bytes, Address>> by_size;  // best-fit index
    std::set<std::uint32_t> chunks;
    Bytes occupied = 0;
};

// One instance's heap: the spaces laid out over its own address space, the
// object table, roots, and remembered set. Every access the runtime makes is
// forwarded to the shared memory device.
class Heap {
public:
    Heap(const CollectorConfig& config, const HeapOptions& options, MemoryDevice& device, InstanceId instance)
        : config_(config),
          options_(options),
          map_(make_space_map(config.variant)),
          address_space_(options.heap_size, options.chunk_size),
          device_(&device),
          instance_(instance) {
        config_.validate();
        if (options_.line_size == 0 || options_.header_size == 0) throw ConfigError("bad object geometry");
        lay_out_young();
        lay_out_boot();
    }

    Heap(const Heap&) = delete;
    Heap& operator=(const Heap&) = delete;

    const CollectorConfig& config() const { return config_; }
    const HeapOptions& options() const { return options_; }
    const SpaceMap& space_map() const { return map_; }
    const AddressSpace& address_space() const { return address_space_; }
    InstanceId instance() const { return instance_; }
    const MemoryDevice& device() const { return *device_; }

    const ContiguousSpace& nursery() const { return nursery_; }
    const ContiguousSpace& observer() const { return observer_; }
    const ContiguousSpace& boot() const { return boot_; }
    const FreeListSpace& free_list_space(SpaceName s) const { return free_spaces_[index_of(s)]; }

    const std::unordered_map<ObjectId, ObjectRecord>& objects() const { return objects_; }
    const RootSet& roots() const { return roots_; }
    const RememberedSet& remembered_set() const { return remset_; }
    const std::vector<ObjectId>& nursery_objects() const { return nursery_objects_; }
    const std::vector<ObjectId>& observer_objects() const { return observer_objects_; }

    bool contains(ObjectId id) const { return objects_.count(id) != 0; }
    const ObjectRecord* find(ObjectId id) const {
        auto it = objects_.find(id);
        return it == objects_.end() ? nullptr : &it->second;
    }
    ObjectRecord* find(ObjectId id) {
        auto it = objects_.find(id);
        return it == objects_.end() ? nullptr : &it->second;
    }
    ObjectRecord& get(ObjectId id) {
        auto* r = find(id);
        if (r == nullptr) throw TraceError("object " + std::to_string(id) + " is not allocated or was reclaimed");
        return *r;
    }
    const ObjectRecord& get(ObjectId id) const { return const_cast<Heap*>(this)->get(id); }

    // The nursery and observer form one contiguous young region at the top of
    // their half, so the barrier is a single range test.
    bool is_young(Address a) const { return a >= young_lo_ && a < young_hi_; }
    Address young_boundary() const { return young_lo_; }

    MemoryKind memory_of(SpaceName s) const { return map_.memory_of(s); }

    Bytes object_size(Bytes requested, std::uint32_t n_refs) const {
        return align_up(std::max(requested, options_.header_size + options_.slot_size * n_refs), 8);
    }

    Bytes mature_occupancy() const {
        Bytes total = 0;
        for (SpaceName s : {SpaceName::mature_dram, SpaceName::mature_pcm, SpaceName::los_dram, SpaceName::los_pcm})
            total += free_spaces_[index_of(s)].occupied;
        return total;
    }

    // ---- allocation primitives ------------------------------------------

    std::optional<Address> bump(SpaceName s, Bytes size) {
        ContiguousSpace& cs = contiguous(s);
        if (cs.free() < size) return std::nullopt;
        const Address a = cs.cursor;
        cs.cursor += size;
        return a;
    }

    void reset_contiguous(SpaceName s) {
        ContiguousSpace& cs = contiguous(s);
        cs.cursor = cs.start;
        if (s == SpaceName::nursery) nursery_objects_.clear();
        if (s == SpaceName::observer) observer_objects_.clear();
    }

    // Best-fit over the space's holes; acquires fresh chunks when no hole fits.
    Address allocate_free_list(SpaceName s, Bytes size) {
        FreeListSpace& fs = free_spaces_[index_of(s)];
        auto it = fs.by_size.lower_bound({size, 0});
        if (it == fs.by_size.end()) {
            acquire_chunks(s, size);
            it = fs.by_size.lower_bound({size, 0});
        }
        const auto [hole_size, hole_addr] = *it;
        remove_hole(fs, hole_addr);
        if (hole_size > size) insert_hole_raw(fs, hole_addr + size, hole_size - size);
        fs.occupied += size;
        return hole_addr;
    }

    void free_extent(SpaceName s, Address addr, Bytes size) {
        FreeListSpace& fs = free_spaces_[index_of(s)];
        fs.occupied -= size;
        const auto [lo, len] = merge_neighbours(fs, addr, size);
        // Whole chunks covered by the hole go back to the free list; their
        // mapping is kept.
        const Bytes cs = options_.chunk_size;
        const Address first_chunk = align_up(lo, cs);
        const Address last_chunk = align_down(lo + len, cs);
        if (first_chunk < last_chunk) {
            for (Address c = first_chunk; c < last_chunk; c += cs) {
                const auto idx = address_space_.chunk_index_of(c);
                address_space_.release_chunk(idx);
                fs.chunks.erase(idx);
            }
            if (first_chunk > lo) insert_hole_raw(fs, lo, first_chunk - lo);
            if (lo + len > last_chunk) insert_hole_raw(fs, last_chunk, lo + len - last_chunk);
        } else {
            insert_hole_raw(fs, lo, len);
        }
    }

    // Shadow mark location of a PCM object in the DRAM metadata space: one
    // metadata byte per 16 heap bytes, chunks acquired on demand.
    Address meta_shadow_line(Address obj_addr) {
        const Bytes cs = options_.chunk_size;
        constexpr Bytes kRatio = 16;
        const Address offset = obj_addr - address_space_.layout().heap_base;
        const std::uint64_t group = offset / (cs * kRatio);
        auto it = meta_groups_.find(group);
        if (it == meta_groups_.end()) {
            const auto& c = address_space_.reserve_chunk(memory_of(SpaceName::meta_dram), SpaceName::meta_dram);
            free_spaces_[index_of(SpaceName::meta_dram)].chunks.insert(c.index);
            it = meta_groups_.emplace(group, c.base).first;
        }
        return align_down(it->second + (offset % (cs * kRatio)) / kRatio, options_.line_size);
    }

    ObjectRecord& create_object(ObjectId id, Address addr, Bytes size, std::uint32_t n_refs, bool large,
                                SpaceName space) {
        ObjectRecord r;
        r.id = id;
        r.addr = addr;
        r.size = size;
        r.space = space;
        r.ref_slots.assign(n_refs, 0);
        r.large = large;
        auto [it, inserted] = objects_.emplace(id, std::move(r));
        if (!inserted) throw TraceError("object id " + std::to_string(id) + " allocated twice");
        if (space == SpaceName::nursery) nursery_objects_.push_back(id);
        if (space == SpaceName::observer) observer_objects_.push_back(id);
        return it->second;
    }

    void erase_object(ObjectId id) {
        roots_.erase(id);
        objects_.erase(id);
    }

    void drop_missing_young() {
        auto missing = [this](ObjectId id) { return !contains(id); };
        nursery_objects_.erase(std::remove_if(nursery_objects_.begin(), nursery_objects_.end(), missing),
                               nursery_objects_.end());
        observer_objects_.erase(std::remove_if(observer_objects_.begin(), observer_objects_.end(), missing),
                                observer_objects_.end());
    }

    void note_observer_resident(ObjectId id) { observer_objects_.push_back(id); }

    // ---- traffic ----------------------------------------------------------

    void emit(Address addr, Bytes len, AccessKind kind, SpaceName space, TrafficSource source) {
        if (len == 0) return;
        const bool through = source != TrafficSource::collector || options_.collector_through_cache;
        device_->access(instance_, addr, len, kind, memory_of(space), space, through);
        auto& slot = emitted_by_source_[static_cast<std::size_t>(source)][index_of(memory_of(space))];
        (kind == AccessKind::write ? slot.write : slot.read) += len;
    }

    // Bytes issued by one source towards one memory kind, before the cache.
    const ByteCounts& emitted(TrafficSource source, MemoryKind kind) const {
        return emitted_by_source_[static_cast<std::size_t>(source)][index_of(kind)];
    }
    Bytes emitted_total() const {
        Bytes t = 0;
        for (const auto& per_kind : emitted_by_source_)
            for (const auto& c : per_kind) t += c.write + c.read;
        return t;
    }

    // ---- mutator operations -----------------------------------------------

    void write_ref(ObjectId parent_id, std::uint32_t slot, ObjectId child_id) {
        ObjectRecord& parent = get(parent_id);
        if (slot >= parent.ref_slots.size()) {
            throw TraceError("slot " + std::to_string(slot) + " out of range for object " + std::to_string(parent_id));
        }
        const ObjectRecord* child = child_id == 0 ? nullptr : &get(child_id);
        parent.ref_slots[slot] = child_id;
        if (child != nullptr && !is_young(parent.addr) && is_young(child->addr)) {
            remset_.insert({parent_id, slot});
        }
        ++parent.write_count;
        const Address slot_addr = parent.addr + options_.header_size + options_.slot_size * slot;
        emit(align_down(slot_addr, options_.line_size), options_.line_size, AccessKind::write, parent.space,
             TrafficSource::mutator);
    }

    void write_data(ObjectId id, Bytes offset, Bytes len) {
        ObjectRecord& obj = get(id);
        check_bounds(obj, offset, len);
        ++obj.write_count;
        emit(obj.addr + offset, len, AccessKind::write, obj.space, TrafficSource::mutator);
    }

    void read_data(ObjectId id, Bytes offset, Bytes len) {
        const ObjectRecord& obj = get(id);
        check_bounds(obj, offset, len);
        emit(obj.addr + offset, len, AccessKind::read, obj.space, TrafficSource::mutator);
    }

    void set_root(ObjectId id, bool rooted) {
        get(id);
        if (rooted) {
            roots_.insert(id);
        } else {
            roots_.erase(id);
        }
    }

    RememberedSet& mutable_remembered_set() { return remset_; }
    std::unordered_map<ObjectId, ObjectRecord>& mutable_objects() { return objects_; }

    // ---- collection bookkeeping -------------------------------------------

    void set_listener(CollectionListener* l) { listener_ = l; }
    CollectionListener* listener() const { return listener_; }
    void set_measuring(bool on) { measuring_ = on; }
    bool measuring() const { return measuring_; }
    const std::vector<CollectionStats>& collection_log() const { return log_; }
    void record(CollectionStats s) {
        s.measured = measuring_;
        log_.push_back(s);
    }

    // Placement soundness plus structural consistency of the spaces.
    void verify() const {
        address_space_.check_invariants();
        for (const auto& [id, obj] : objects_) {
            invariant(obj.size >= options_.header_size, "object smaller than its header");
            const MemoryKind kind = memory_of(obj.space);
            invariant(address_space_.region_of(obj.addr) == kind, "object placed in the wrong memory");
            invariant(address_space_.region_of(obj.addr + obj.size - 1) == kind, "object straddles memories");
            switch (obj.space) {
                case SpaceName::nursery:
                    invariant(obj.addr >= nursery_.start && obj.addr + obj.size <= nursery_.cursor,
                              "nursery object outside the allocated nursery");
                    break;
                case SpaceName::observer:
                    invariant(obj.addr >= observer_.start && obj.addr + obj.size <= observer_.cursor,
                              "observer object outside the allocated observer");
                    break;
                default: {
                    const auto first = address_space_.chunk_index_of(obj.addr);
                    const auto last = address_space_.chunk_index_of(obj.addr + obj.size - 1);
                    for (auto c = first; c <= last; ++c) {
                        invariant(address_space_.chunk(c).owner == obj.space, "object outside its space's chunks");
                    }
                }
            }
        }
        for (const auto& e : remset_) {
            const auto* src = find(e.object);
            invariant(src != nullptr, "remembered entry for a reclaimed object");
            invariant(!is_young(src->addr), "remembered entry with a young source");
        }
        Bytes occupied = 0;
        for (const auto& [id, obj] : objects_) {
            if (obj.space == SpaceName::mature_dram || obj.space == SpaceName::mature_pcm ||
                obj.space == SpaceName::los_dram || obj.space == SpaceName::los_pcm)
                occupied += obj.size;
        }
        invariant(occupied == mature_occupancy(), "mature occupancy disagrees with the object table");
    }

private:
    ContiguousSpace& contiguous(SpaceName s) {
        switch (s) {
            case SpaceName::nursery: return nursery_;
            case SpaceName::observer: return observer_;
            case SpaceName::boot: return boot_;
            default: throw std::logic_error("not a contiguous space");
        }
    }

    void lay_out_young() {
        const MemoryKind kind = memory_of(SpaceName::nursery);
        const Bytes nursery = align_up(config_.nursery_size, 8);
        const Bytes observer = config_.observer_size();
        const Bytes cs = options_.chunk_size;
        const auto chunks = static_cast<std::uint32_t>(align_up(nursery + observer, cs) / cs);
        if (chunks > address_space_.layout().chunks_per_half()) {
            throw ConfigError("nursery and observer do not fit in their half of the heap");
        }
        const auto first = address_space_.reserve_run(kind, chunks, SpaceName::nursery, /*from_top=*/true);
        const Address run_end = address_space_.chunk(first).base + Bytes{chunks} * cs;
        nursery_ = {run_end - nursery, run_end, run_end - nursery};
        if (observer > 0) {
            observer_ = {run_end - nursery - observer, run_end - nursery, run_end - nursery - observer};
        } else {
            observer_ = {nursery_.start, nursery_.start, nursery_.start};
        }
        young_lo_ = observer > 0 ? observer_.start : nursery_.start;
        young_hi_ = run_end;
    }

    void lay_out_boot() {
        const Bytes boot = align_up(options_.boot_bytes, 8);
        if (boot == 0) {
            boot_ = {};
            return;
        }
        const Bytes cs = options_.chunk_size;
        const auto chunks = static_cast<std::uint32_t>(align_up(boot, cs) / cs);
        const auto first = address_space_.reserve_run(memory_of(SpaceName::boot), chunks, SpaceName::boot);
        const Address base = address_space_.chunk(first).base;
        boot_ = {base, base + boot, base + boot};
        // Loading the boot image writes it once.
        emit(base, boot, AccessKind::write, SpaceName::boot, TrafficSource::allocation);
    }

    void acquire_chunks(SpaceName s, Bytes size) {
        FreeListSpace& fs = free_spaces_[index_of(s)];
        const Bytes cs = options_.chunk_size;
        const auto n = static_cast<std::uint32_t>(align_up(size, cs) / cs);
        const MemoryKind kind = memory_of(s);
        std::uint32_t first;
        if (n == 1) {
            first = address_space_.reserve_chunk(kind, s).index;
        } else {
            if (n > address_space_.layout().chunks_per_half()) {
                throw AllocationFailure("object of " + std::to_string(size) + " bytes exceeds the heap half");
            }
            first = address_space_.reserve_run(kind, n, s);
        }
        for (std::uint32_t k = 0; k < n; ++k) fs.chunks.insert(first + k);
        const auto [lo, len] = merge_neighbours(fs, address_space_.chunk(first).base, Bytes{n} * cs);
        insert_hole_raw(fs, lo, len);
    }

    // Removes the holes adjacent to [addr, addr + size) and returns the merged range.
    static std::pair<Address, Bytes> merge_neighbours(FreeListSpace& fs, Address addr, Bytes size) {
        Address lo = addr;
        Bytes len = size;
        auto next = fs.holes.find(addr + size);
        if (next != fs.holes.end()) {
            len += next->second;
            remove_hole(fs, next->first);
        }
        auto after = fs.holes.lower_bound(lo);
        if (after != fs.holes.begin()) {
            auto prev = std::prev(after);
            if (prev->first + prev->second == lo) {
                lo = prev->first;
                len += prev->second;
                remove_hole(fs, prev->first);
            }
        }
        return {lo, len};
    }

    static void insert_hole_raw(FreeListSpace& fs, Address addr, Bytes size) {
        fs.holes.emplace(addr, size);
        fs.by_size.emplace(size, addr);
    }
    static void remove_hole(FreeListSpace& fs, Address addr) {
        auto it = fs.holes.find(addr);
        fs.by_size.erase({it->second, addr});
        fs.holes.erase(it);
    }

    static void check_bounds(const ObjectRecord& obj, Bytes offset, Bytes len) {
        if (len == 0) throw TraceError("zero-length access to object " + std::to_string(obj.id));
        if (offset > obj.size || len > obj.size - offset) {
            throw TraceError("access [" + std::to_string(offset) + ", +" + std::to_string(len) +
                             ") out of bounds for object " + std::to_string(obj.id));
        }
    }

    CollectorConfig config_;
    HeapOptions options_;
    SpaceMap map_;
    AddressSpace address_space_;
    MemoryDevice* device_;
    InstanceId instance_;

    ContiguousSpace nursery_;
    ContiguousSpace observer_;
    ContiguousSpace boot_;
    std::array<FreeListSpace, kSpaceCount> free_spaces_;
    std::unordered_map<std::uint64_t, Address> meta_groups_;
    Address young_lo_ = 0;
    Address young_hi_ = 0;

    std::unordered_map<ObjectId, ObjectRecord> objects_;
    RootSet roots_;
    RememberedSet remset_;
    std::vector<ObjectId> nursery_objects_;
    std::vector<ObjectId> observer_objects_;

    std::array<std::array<ByteCounts, kMemoryKindCount>, 3> emitted_by_source_{};
    CollectionListener* listener_ = nullptr;
    bool measuring_ = true;
    std::vector<CollectionStats> log_;
};

}  // namespace wrsim

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wrsim/common.hpp"

namespace wrsim {

// The simulated virtual heap. The lower half maps to PCM and the upper half
// to DRAM; the split address itself belongs to the DRAM half.
struct HeapLayout {
    Address heap_base = 0;
    Bytes heap_size = 2 * GiB;
    Address split = 1 * GiB;
    Bytes chunk_size = 4 * MiB;

    std::uint32_t chunk_count() const { return static_cast<std::uint32_t>(heap_size / chunk_size); }
    std::uint32_t chunks_per_half() const { return chunk_count() / 2; }
    Address heap_end() const { return heap_base + heap_size; }
    bool contains(Address addr) const { return addr >= heap_base && addr < heap_end(); }
};

inline MemoryKind region_of(const HeapLayout& layout, Address addr) {
    if (!layout.contains(addr)) {
        throw RangeError("address " + std::to_string(addr) + " lies outside the heap");
    }
    return addr < layout.split ? MemoryKind::pcm : MemoryKind::dram;
}

enum class ChunkStatus : std::uint8_t { free, in_use };

struct ChunkDescriptor {
    std::uint32_t index = 0;
    Address base = 0;
    Bytes size = 0;
    ChunkStatus status = ChunkStatus::free;
    std::optional<SpaceName> owner;
    bool mapped = false;
};

// One list per memory kind. Holds every chunk of its half; status says
// which are free.
struct FreeList {
    MemoryKind kind = MemoryKind::pcm;
    std::vector<ChunkDescriptor> chunks;

    std::size_t free_count() const {
        std::size_t n = 0;
        for (const auto& c : chunks) n += c.status == ChunkStatus::free;
        return n;
    }
    std::size_t in_use_count() const { return chunks.size() - free_count(); }
};

struct BindEvent {
    std::uint32_t chunk_index;
    MemoryKind kind;
};

// Records the modeled placement binding (the simulated analogue of binding a
// freshly mapped range to a socket). A chunk is bound on its first mapping only.
class PlacementBinding {
public:
    void bind(std::uint32_t chunk_index, MemoryKind kind) { log_.push_back({chunk_index, kind}); }
    const std::vector<BindEvent>& log() const { return log_; }

private:
    std::vector<BindEvent> log_;
};

class AddressSpace {
public:
    AddressSpace(Bytes heap_size, Bytes chunk_size) {
        if (chunk_size == 0 || heap_size == 0 || heap_size % (2 * chunk_size) != 0) {
            throw ConfigError("heap size must be a positive multiple of twice the chunk size");
        }
        layout_.heap_base = 0;
        layout_.heap_size = heap_size;
        layout_.chunk_size = chunk_size;
        layout_.split = layout_.heap_base + heap_size / 2;

        const std::uint32_t half = layout_.chunks_per_half();
        lists_[index_of(MemoryKind::pcm)].kind = MemoryKind::pcm;
        lists_[index_of(MemoryKind::dram)].kind = MemoryKind::dram;
        for (std::uint32_t i = 0; i < layout_.chunk_count(); ++i) {
            ChunkDescriptor c;
            c.index = i;
            c.base = layout_.heap_base + Bytes{i} * chunk_size;
            c.size = chunk_size;
            auto& list = i < half ? lists_[index_of(MemoryKind::pcm)] : lists_[index_of(MemoryKind::dram)];
            list.chunks.push_back(c);
        }
    }

    const HeapLayout& layout() const { return layout_; }
    const FreeList& free_list(MemoryKind kind) const { return lists_[index_of(kind)]; }
    const PlacementBinding& binding() const { return binding_; }

    MemoryKind region_of(Address addr) const { return wrsim::region_of(layout_, addr); }

    const ChunkDescriptor& chunk(std::uint32_t index) const { return locate(index); }

    std::uint32_t chunk_index_of(Address addr) const {
        if (!layout_.contains(addr)) throw RangeError("address outside the heap");
        return static_cast<std::uint32_t>((addr - layout_.heap_base) / layout_.chunk_size);
    }

    // Lowest-index free chunk of the given kind.
    const ChunkDescriptor& reserve_chunk(MemoryKind kind, SpaceName owner) {
        auto& list = lists_[index_of(kind)];
        for (auto& c : list.chunks) {
            if (c.status == ChunkStatus::free) {
                take(c, owner);
                return c;
            }
        }
        throw OutOfChunks(kind);
    }

    // Lowest-addressed run of `count` contiguous free chunks, or the
    // highest-addressed one when from_top is set. Returns the first index.
    std::uint32_t reserve_run(MemoryKind kind, std::uint32_t count, SpaceName owner, bool from_top = false) {
        if (count == 0) throw ConfigError("cannot reserve an empty chunk run");
        auto& list = lists_[index_of(kind)];
        const auto n = static_cast<std::uint32_t>(list.chunks.size());
        if (count > n) throw OutOfChunks(kind);
        auto run_free = [&](std::uint32_t first) {
            for (std::uint32_t k = 0; k < count; ++k) {
                if (list.chunks[first + k].status != ChunkStatus::free) return false;
            }
            return true;
        };
        std::optional<std::uint32_t> found;
        if (from_top) {
            for (std::uint32_t first = n - count + 1; first-- > 0;) {
                if (run_free(first)) { found = first; break; }
            }
        } else {
            for (std::uint32_t first = 0; first + count <= n; ++first) {
                if (run_free(first)) { found = first; break; }
            }
        }
        if (!found) throw OutOfChunks(kind);
        for (std::uint32_t k = 0; k < count; ++k) take(list.chunks[*found + k], owner);
        return list.chunks[*found].index;
    }

    void release_chunk(std::uint32_t index) {
        auto& c = locate(index);
        if (c.status != ChunkStatus::in_use) {
            throw DoubleFree("chunk " + std::to_string(index) + " is already free");
        }
        c.status = ChunkStatus::free;
        c.owner.reset();
        check();
    }

    // Conservation, kind consistency, and status/owner agreement.
    void check_invariants() const {
        for (std::size_t k = 0; k < kMemoryKindCount; ++k) {
            const auto& list = lists_[k];
            invariant(list.chunks.size() == layout_.chunks_per_half(), "free list lost chunks");
            invariant(list.free_count() + list.in_use_count() == list.chunks.size(),
                      "chunk conservation violated");
            for (const auto& c : list.chunks) {
                invariant(region_of(c.base) == list.kind, "chunk on the wrong free list");
                invariant(region_of(c.base + c.size - 1) == list.kind, "chunk straddles the split");
                invariant((c.status == ChunkStatus::in_use) == c.owner.has_value(),
                          "in-use status and owner disagree");
            }
        }
        std::vector<std::uint8_t> binds(layout_.chunk_count(), 0);
        for (const auto& e : binding_.log()) {
            invariant(++binds[e.chunk_index] <= 1, "chunk bound more than once");
            invariant(e.kind == region_of(chunk(e.chunk_index).base), "bound kind mismatch");
        }
    }

private:
    ChunkDescriptor& locate(std::uint32_t index) {
        if (index >= layout_.chunk_count()) throw RangeError("chunk index out of range");
        const std::uint32_t half = layout_.chunks_per_half();
        return index < half ? lists_[index_of(MemoryKind::pcm)].chunks[index]
                            : lists_[index_of(MemoryKind::dram)].chunks[index - half];
    }
    const ChunkDescriptor& locate(std::uint32_t index) const {
        return const_cast<AddressSpace*>(this)->locate(index);
    }

    void take(ChunkDescriptor& c, SpaceName owner) {
        c.status = ChunkStatus::in_use;
        c.owner = owner;
        if (!c.mapped) {
            c.mapped = true;
            binding_.bind(c.index, region_of(c.base));
        }
        check();
    }

    void check() const {
        if constexpr (kCheckInvariants) check_invariants();
    }

    HeapLayout layout_;
    std::array<FreeList, kMemoryKindCount> lists_;
    PlacementBinding binding_;
};

inline AddressSpace init_layout(Bytes heap_size = 2 * GiB, Bytes chunk_size = 4 * MiB) {
    return AddressSpace(heap_size, chunk_size);
}

}  // namespace wrsim

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wrsim/common.hpp"

namespace wrsim {

enum class Variant : std::uint8_t {
    pcm_only,
    kg_n,
    kg_b,
    kg_n_loo,
    kg_b_loo,
    kg_w,
    kg_w_no_loo,
    kg_w_no_mdo,
};

inline constexpr std::array<Variant, 8> kAllVariants = {
    Variant::pcm_only, Variant::kg_n,  Variant::kg_b,        Variant::kg_n_loo,
    Variant::kg_b_loo, Variant::kg_w,  Variant::kg_w_no_loo, Variant::kg_w_no_mdo,
};

inline constexpr std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::pcm_only: return "PCM-Only";
        case Variant::kg_n: return "KG-N";
        case Variant::kg_b: return "KG-B";
        case Variant::kg_n_loo: return "KG-N+LOO";
        case Variant::kg_b_loo: return "KG-B+LOO";
        case Variant::kg_w: return "KG-W";
        case Variant::kg_w_no_loo: return "KG-W-LOO";
        case Variant::kg_w_no_mdo: return "KG-W-MDO";
    }
    return "?";
}

// Accepts the ASCII names above; a Unicode minus in the KG-W ablations is
// also understood.
inline Variant parse_variant(std::string_view text) {
    std::string s(text);
    const std::string minus = "\xE2\x88\x92";
    for (std::size_t p = s.find(minus); p != std::string::npos; p = s.find(minus)) s.replace(p, minus.size(), "-");
    for (Variant v : kAllVariants) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown collector '" + std::string(text) + "'");
}

inline constexpr bool is_kg_w_family(Variant v) {
    return v == Variant::kg_w || v == Variant::kg_w_no_loo || v == Variant::kg_w_no_mdo;
}
inline constexpr bool is_kg_b_family(Variant v) { return v == Variant::kg_b || v == Variant::kg_b_loo; }
inline constexpr bool variant_uses_loo(Variant v) {
    return v == Variant::kg_n_loo || v == Variant::kg_b_loo || v == Variant::kg_w || v == Variant::kg_w_no_mdo;
}
inline constexpr bool variant_uses_mdo(Variant v) { return v == Variant::kg_w || v == Variant::kg_w_no_loo; }

inline constexpr Bytes kKgBNurseryMultiplier = 3;

struct CollectorConfig {
    Variant variant = Variant::kg_w;
    Bytes nursery_size = 4 * MiB;  // effective size, multiplier already applied
    double observer_multiplier = 2.0;
    Bytes heap_budget = 64 * MiB;  // mature + large-object occupancy budget
    bool loo = true;
    bool mdo = true;
    std::uint64_t large_relocation_threshold = 4;
    Bytes large_threshold = 8 * KiB;
    double loo_fraction = 1.0 / 8.0;

    bool has_observer() const { return is_kg_w_family(variant); }
    Bytes observer_size() const {
        return has_observer() ? align_up(static_cast<Bytes>(static_cast<double>(nursery_size) * observer_multiplier), 8) : 0;
    }

    void validate() const {
        if (nursery_size == 0) throw ConfigError("nursery size must be positive");
        if (heap_budget == 0) throw ConfigError("heap budget must be positive");
        if (large_threshold == 0) throw ConfigError("large-object threshold must be positive");
        if (!(loo_fraction > 0) || loo_fraction > 1) throw ConfigError("LOO fraction must lie in (0, 1]");
        if (has_observer() && !(observer_multiplier >= 1.0)) {
            throw ConfigError("observer multiplier must be at least 1");
        }
        if (!has_observer() && (mdo)) throw ConfigError("MDO requires a KG-W collector");
        if (loo != variant_uses_loo(variant) || mdo != variant_uses_mdo(variant)) {
            throw ConfigError("LOO/MDO flags disagree with the collector variant");
        }
    }
};

// Builds the per-variant configuration from the base nursery size. KG-B
// variants triple the nursery.
inline CollectorConfig make_collector_config(Variant variant, Bytes base_nursery, Bytes heap_budget,
                                             double observer_multiplier = 2.0) {
    CollectorConfig c;
    c.variant = variant;
    c.nursery_size = is_kg_b_family(variant) ? base_nursery * kKgBNurseryMultiplier : base_nursery;
    c.observer_multiplier = observer_multiplier;
    c.heap_budget = heap_budget;
    c.loo = variant_uses_loo(variant);
    c.mdo = variant_uses_mdo(variant);
    return c;
}

enum class SpaceKind : std::uint8_t { contiguous_copying, mature, large_object, metadata, immortal };
enum class Extent : std::uint8_t { boot_reserved, on_demand };
enum class Allocation : std::uint8_t { bump_cursor, free_list };

struct SpaceDescriptor {
    SpaceName name;
    SpaceKind kind;
    MemoryKind memory;
    Extent extent;
    Allocation allocation;
};

class SpaceMap {
public:
    explicit SpaceMap(Variant variant) : variant_(variant) {}

    Variant variant() const { return variant_; }
    const std::vector<SpaceDescriptor>& spaces() const { return spaces_; }
    bool contains(SpaceName name) const { return find(name) != nullptr; }

    const SpaceDescriptor* find(SpaceName name) const {
        for (const auto& s : spaces_)
            if (s.name == name) return &s;
        return nullptr;
    }
    const SpaceDescriptor& at(SpaceName name) const {
        const auto* s = find(name);
        if (s == nullptr) throw ConfigError("space " + std::string(to_string(name)) + " is absent for " +
                                            std::string(to_string(variant_)));
        return *s;
    }
    MemoryKind memory_of(SpaceName name) const { return at(name).memory; }

    void add(SpaceDescriptor d) { spaces_.push_back(d); }

private:
    Variant variant_;
    std::vector<SpaceDescriptor> spaces_;
};

inline SpaceMap make_space_map(Variant variant) {
    SpaceMap map(variant);
    const MemoryKind young = variant == Variant::pcm_only ? MemoryKind::pcm : MemoryKind::dram;
    map.add({SpaceName::boot, SpaceKind::immortal, young, Extent::boot_reserved, Allocation::bump_cursor});
    map.add({SpaceName::nursery, SpaceKind::contiguous_copying, young, Extent::boot_reserved, Allocation::bump_cursor});
    if (is_kg_w_family(variant)) {
        map.add({SpaceName::observer, SpaceKind::contiguous_copying, MemoryKind::dram, Extent::boot_reserved,
                 Allocation::bump_cursor});
        map.add({SpaceName::mature_dram, SpaceKind::mature, MemoryKind::dram, Extent::on_demand, Allocation::free_list});
        map.add({SpaceName::los_dram, SpaceKind::large_object, MemoryKind::dram, Extent::on_demand,
                 Allocation::free_list});
        if (variant_uses_mdo(variant)) {
            map.add({SpaceName::meta_dram, SpaceKind::metadata, MemoryKind::dram, Extent::on_demand,
                     Allocation::free_list});
        }
    }
    map.add({SpaceName::mature_pcm, SpaceKind::mature, MemoryKind::pcm, Extent::on_demand, Allocation::free_list});
    map.add({SpaceName::los_pcm, SpaceKind::large_object, MemoryKind::pcm, Extent::on_demand, Allocation::free_list});
    map.add({SpaceName::meta_pcm, SpaceKind::metadata, MemoryKind::pcm, Extent::on_demand, Allocation::free_list});
    return map;
}

}  // namespace wrsim

#include <gtest/gtest.h>

#include "wrsim/collectors.hpp"
#include "wrsim/spaces.hpp"

using namespace wrsim;

TEST(Variant, NamesRoundTrip) {
    for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_EQ(parse_variant("KG-W\xE2\x88\x92LOO"), Variant::kg_w_no_loo);
    EXPECT_THROW(parse_variant("KG-Z"), ConfigError);
}

TEST(Variant, FeatureTable) {
    struct Row {
        Variant v;
        bool loo, mdo, observer;
        Bytes nursery;
    };
    const Row rows[] = {
        {Variant::pcm_only, false, false, false, 4 * MiB},   {Variant::kg_n, false, false, false, 4 * MiB},
        {Variant::kg_b, false, false, false, 12 * MiB},      {Variant::kg_n_loo, true, false, false, 4 * MiB},
        {Variant::kg_b_loo, true, false, false, 12 * MiB},   {Variant::kg_w, true, true, true, 4 * MiB},
        {Variant::kg_w_no_loo, false, true, true, 4 * MiB},  {Variant::kg_w_no_mdo, true, false, true, 4 * MiB},
    };
    for (const Row& r : rows) {
        const CollectorConfig c = make_collector_config(r.v, 4 * MiB, 64 * MiB);
        EXPECT_EQ(c.loo, r.loo) << to_string(r.v);
        EXPECT_EQ(c.mdo, r.mdo) << to_string(r.v);
        EXPECT_EQ(c.has_observer(), r.observer) << to_string(r.v);
        EXPECT_EQ(c.nursery_size, r.nursery) << to_string(r.v);
        EXPECT_EQ(c.observer_size(), r.observer ? 8 * MiB : 0) << to_string(r.v);
        EXPECT_NO_THROW(c.validate());
    }
}

TEST(CollectorConfig, RejectsInconsistentFlags) {
    CollectorConfig c = make_collector_config(Variant::kg_n, 4 * MiB, 64 * MiB);
    c.mdo = true;
    EXPECT_THROW(c.validate(), ConfigError);
    c = make_collector_config(Variant::kg_w, 4 * MiB, 64 * MiB);
    c.observer_multiplier = 0.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = make_collector_config(Variant::kg_w, 0, 64 * MiB);
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SpaceMap, PcmOnlyPutsEverythingInPcm) {
    const SpaceMap m = make_space_map(Variant::pcm_only);
    for (const auto& s : m.spaces()) EXPECT_EQ(s.memory, MemoryKind::pcm) << to_string(s.name);
    EXPECT_FALSE(m.contains(SpaceName::observer));
    EXPECT_THROW(m.at(SpaceName::mature_dram), ConfigError);
}

TEST(SpaceMap, KgNKeepsYoungInDram) {
    const SpaceMap m = make_space_map(Variant::kg_n);
    EXPECT_EQ(m.memory_of(SpaceName::nursery), MemoryKind::dram);
    EXPECT_EQ(m.memory_of(SpaceName::boot), MemoryKind::dram);
    EXPECT_EQ(m.memory_of(SpaceName::mature_pcm), MemoryKind::pcm);
    EXPECT_EQ(m.memory_of(SpaceName::los_pcm), MemoryKind::pcm);
    EXPECT_FALSE(m.contains(SpaceName::mature_dram));
    EXPECT_FALSE(m.contains(SpaceName::los_dram));
}

TEST(SpaceMap, KgWFamily) {
    for (Variant v : {Variant::kg_w, Variant::kg_w_no_loo, Variant::kg_w_no_mdo}) {
        const SpaceMap m = make_space_map(v);
        EXPECT_EQ(m.memory_of(SpaceName::observer), MemoryKind::dram);
        EXPECT_EQ(m.memory_of(SpaceName::mature_dram), MemoryKind::dram);
        EXPECT_EQ(m.memory_of(SpaceName::los_dram), MemoryKind::dram);
        EXPECT_EQ(m.memory_of(SpaceName::mature_pcm), MemoryKind::pcm);
        EXPECT_EQ(m.contains(SpaceName::meta_dram), variant_uses_mdo(v));
        const auto& d = m.at(SpaceName::nursery);
        EXPECT_EQ(d.kind, SpaceKind::contiguous_copying);
        EXPECT_EQ(d.allocation, Allocation::bump_cursor);
        EXPECT_EQ(m.at(SpaceName::mature_pcm).allocation, Allocation::free_list);
    }
}

TEST(RouteSurvivor, MinorPhase) {
    ObjectRecord o;
    EXPECT_EQ(route_survivor(make_collector_config(Variant::pcm_only, 4 * MiB, MiB), o, SurvivorPhase::minor),
              SpaceName::mature_pcm);
    EXPECT_EQ(route_survivor(make_collector_config(Variant::kg_b, 4 * MiB, MiB), o, SurvivorPhase::minor),
              SpaceName::mature_pcm);
    EXPECT_EQ(route_survivor(make_collector_config(Variant::kg_w, 4 * MiB, MiB), o, SurvivorPhase::minor),
              SpaceName::observer);
}

TEST(RouteSurvivor, ObserverPhaseFollowsWrites) {
    const auto c = make_collector_config(Variant::kg_w, 4 * MiB, MiB);
    ObjectRecord o;
    EXPECT_EQ(route_survivor(c, o, SurvivorPhase::observer), SpaceName::mature_pcm);
    o.write_count = 1;
    EXPECT_EQ(route_survivor(c, o, SurvivorPhase::observer), SpaceName::mature_dram);
    EXPECT_THROW(route_survivor(make_collector_config(Variant::kg_n, 4 * MiB, MiB), o, SurvivorPhase::observer),
                 CollectorLogicError);
}

TEST(Loo, AdmissionRule) {
    const auto with = make_collector_config(Variant::kg_w, 4 * MiB, MiB);
    const auto without = make_collector_config(Variant::kg_w_no_loo, 4 * MiB, MiB);
    EXPECT_EQ(loo_admit(with, 512 * KiB, 4 * MiB), LargePlacement::nursery);
    EXPECT_EQ(loo_admit(with, 512 * KiB + 8, 4 * MiB), LargePlacement::los);
    EXPECT_EQ(loo_admit(with, 64 * KiB, 32 * KiB), LargePlacement::los);
    EXPECT_EQ(loo_admit(without, 16 * KiB, 4 * MiB), LargePlacement::los);
}

#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace wrsim;
using wrsim::testing::geometry;

namespace {

std::vector<MemoryEvent> run(CacheModel& c, InstanceId inst, Address addr, Bytes len, AccessKind kind,
                             MemoryKind region = MemoryKind::pcm, SpaceName space = SpaceName::mature_pcm) {
    std::vector<MemoryEvent> out;
    c.access(inst, addr, len, kind, region, space, [&](const MemoryEvent& e) { out.push_back(e); });
    return out;
}

}  // namespace

TEST(CacheGeometry, DefaultsAndValidation) {
    CacheGeometry g;
    EXPECT_EQ(g.capacity, 20 * MiB);
    EXPECT_EQ(g.ways, 16u);
    EXPECT_EQ(g.line, 64u);
    EXPECT_EQ(g.sets(), 20480u);
    EXPECT_THROW((CacheGeometry{1000, 16, 64}.validate()), ConfigError);
    EXPECT_THROW((CacheGeometry{1024, 0, 64}.validate()), ConfigError);
    EXPECT_NO_THROW((CacheGeometry{0, 16, 64}.validate()));
}

TEST(CacheModel, WriteMissFillsThenHitsQuietly) {
    CacheModel c(geometry(4, 2));
    auto ev = run(c, 0, 130, 8, AccessKind::write);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].type, EventType::fill);
    EXPECT_EQ(ev[0].addr, 128u);
    EXPECT_EQ(ev[0].bytes, 64u);
    EXPECT_TRUE(run(c, 0, 128, 64, AccessKind::read).empty());
    EXPECT_EQ(c.dirty_lines(), 1u);
}

TEST(CacheModel, SpanningAccessTouchesEveryLine) {
    CacheModel c(geometry(8, 2));
    auto ev = run(c, 0, 60, 10, AccessKind::read);
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_EQ(ev[0].addr, 0u);
    EXPECT_EQ(ev[1].addr, 64u);
}

TEST(CacheModel, DirtyVictimWrittenBackBeforeFill) {
    CacheModel c(geometry(1, 2));
    run(c, 0, 0, 8, AccessKind::write);
    run(c, 0, 64, 8, AccessKind::read);
    run(c, 0, 64, 8, AccessKind::read);
    auto ev = run(c, 0, 128, 8, AccessKind::read);
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_EQ(ev[0].type, EventType::writeback);
    EXPECT_EQ(ev[0].addr, 0u);
    EXPECT_EQ(ev[1].type, EventType::fill);
}

TEST(CacheModel, InstancesDoNotShareLines) {
    CacheModel c(geometry(4, 4));
    run(c, 0, 0, 8, AccessKind::read);
    auto ev = run(c, 1, 0, 8, AccessKind::read);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].type, EventType::fill);
    EXPECT_EQ(ev[0].instance, 1u);
}

TEST(CacheModel, DisabledCachePassesRawAccessesThrough) {
    CacheModel c(CacheGeometry{0, 16, 64});
    auto w = run(c, 2, 100, 37, AccessKind::write);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0].type, EventType::write_through);
    EXPECT_EQ(w[0].bytes, 37u);
    EXPECT_EQ(w[0].addr, 100u);
    auto r = run(c, 2, 5, 3, AccessKind::read);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].type, EventType::read_through);
}

TEST(CacheModel, DrainWritesEachDirtyLineOnce) {
    CacheModel c(geometry(4, 2));
    for (Address a = 0; a < 8 * 64; a += 64) run(c, 0, a, 1, AccessKind::write);
    std::vector<MemoryEvent> out;
    c.drain([&](const MemoryEvent& e) { out.push_back(e); });
    EXPECT_EQ(out.size(), 8u);
    for (const auto& e : out) EXPECT_EQ(e.type, EventType::writeback);
    EXPECT_EQ(c.dirty_lines(), 0u);
    out.clear();
    c.drain([&](const MemoryEvent& e) { out.push_back(e); });
    EXPECT_TRUE(out.empty());
}

TEST(CacheModel, MatchesReferenceOnSmallCaches) {
    for (std::uint64_t lines = 1; lines <= 8; ++lines) {
        for (std::uint32_t ways = 1; ways <= lines; ++ways) {
            if (lines % ways != 0) continue;
            for (std::uint64_t seed = 1; seed <= 3; ++seed) {
                EXPECT_EQ(wrsim::testing::cache_divergence(lines / ways, ways, seed, 20000), -1)
                    << "sets=" << lines / ways << " ways=" << ways << " seed=" << seed;
            }
        }
    }
}

TEST(MemoryDevice, CountsByRegionAndSpace) {
    MemoryDevice dev(CacheGeometry{0, 16, 64});
    dev.access(0, 0, 100, AccessKind::write, MemoryKind::pcm, SpaceName::mature_pcm);
    dev.access(0, 1 * GiB, 40, AccessKind::read, MemoryKind::dram, SpaceName::nursery);
    dev.access(1, 0, 8, AccessKind::write, MemoryKind::dram, SpaceName::observer);
    const auto& t0 = dev.counters().instance(0);
    EXPECT_EQ(t0.write_bytes(MemoryKind::pcm), 100u);
    EXPECT_EQ(t0.read_bytes(MemoryKind::dram), 40u);
    EXPECT_EQ(t0.memory[index_of(MemoryKind::pcm)][index_of(SpaceName::mature_pcm)].write, 100u);
    EXPECT_EQ(dev.counters().instance(1).write_bytes(MemoryKind::dram), 8u);
    EXPECT_EQ(dev.counters().instance(7).write_bytes(MemoryKind::dram), 0u);
}

TEST(MemoryDevice, FilterConservationHoldsThroughDrain) {
    MemoryDevice dev(geometry(16, 4));
    std::vector<MemoryEvent> log;
    dev.set_event_log(&log);
    std::mt19937_64 rng(3);
    Bytes writes_emitted = 0;
    for (int i = 0; i < 50000; ++i) {
        const auto inst = static_cast<InstanceId>(rng() % 2);
        const Address a = rng() % (256 * 64);
        const Bytes len = 1 + rng() % 100;
        const bool w = rng() % 2;
        const MemoryKind r = rng() % 2 ? MemoryKind::pcm : MemoryKind::dram;
        dev.access(inst, a, len, w ? AccessKind::write : AccessKind::read, r, SpaceName::mature_pcm);
        writes_emitted += w ? len : 0;
        for (InstanceId k = 0; k < 2; ++k) {
            const auto& l = dev.cache().ledger(k, r);
            ASSERT_EQ(l.dirtied, l.written_back + l.resident_dirty);
        }
    }
    dev.drain();
    EXPECT_NO_THROW(dev.check_drained());
    std::uint64_t writebacks = 0;
    for (const auto& e : log) writebacks += e.type == EventType::writeback;
    std::uint64_t dirtied = 0;
    for (InstanceId k = 0; k < 2; ++k)
        for (MemoryKind r : {MemoryKind::dram, MemoryKind::pcm}) dirtied += dev.cache().ledger(k, r).dirtied;
    EXPECT_EQ(writebacks, dirtied);
    Bytes emitted = 0;
    for (InstanceId k = 0; k < 2; ++k) {
        const auto& t = dev.counters().instance(k);
        emitted += t.emitted_bytes(MemoryKind::dram, AccessKind::write) + t.emitted_bytes(MemoryKind::pcm, AccessKind::write);
    }
    EXPECT_EQ(emitted, writes_emitted);
}

TEST(MemoryDevice, BypassSkipsTheCache) {
    MemoryDevice dev(geometry(4, 4));
    dev.access(0, 0, 10, AccessKind::write, MemoryKind::pcm, SpaceName::mature_pcm, /*through_cache=*/false);
    EXPECT_EQ(dev.counters().instance(0).write_bytes(MemoryKind::pcm), 10u);
    EXPECT_EQ(dev.cache().dirty_lines(), 0u);
}

TEST(SimClock, LinearCost) {
    SimClock c;
    c.advance(10, 100);
    EXPECT_DOUBLE_EQ(c.now_ns(), 10 * 5.0 + 100 * 0.25);
    EXPECT_DOUBLE_EQ(c.now_seconds(), 75e-9);
}

TEST(WriteRate, DefinedOnlyForPositiveTime) {
    EXPECT_DOUBLE_EQ(pcm_write_rate(1000, 2.0), 500.0);
    EXPECT_THROW(pcm_write_rate(1000, 0.0), UndefinedRate);
    SimClock c;
    InstanceTraffic t;
    EXPECT_THROW(pcm_write_rate(t, c), UndefinedRate);
}

// Reference values computed once from C*E*eta / (W * 365.25 days).
TEST(Lifetime, FrozenReferenceValues) {
    const LifetimeModel m;
    EXPECT_NEAR(lifetime_years(m, 480e6), 10.56269593800965, 1e-9);
    EXPECT_NEAR(lifetime_years(m, 126e6), 40.23884166860819, 1e-9);
    EXPECT_NEAR(lifetime_years(m, 1e9), 5.070094050244632, 1e-9);
}

TEST(Lifetime, InverseInRate) {
    const LifetimeModel m;
    for (double w : {1e3, 7.5e6, 3.3e8, 2e10}) {
        EXPECT_NEAR(lifetime_years(m, w) * w, lifetime_years(m, 2 * w) * 2 * w, 1e-6 * lifetime_years(m, w) * w);
    }
    LifetimeModel doubled = m;
    doubled.endurance *= 2;
    EXPECT_NEAR(lifetime_years(doubled, 480e6), 2 * lifetime_years(m, 480e6), 1e-9);
}

TEST(Lifetime, EdgeCases) {
    const LifetimeModel m;
    EXPECT_EQ(lifetime_years(m, 0.0), kUnboundedLifetimeYears);
    EXPECT_EQ(lifetime_years(m, 1e-3), kUnboundedLifetimeYears);
    EXPECT_THROW(lifetime_years(m, -1.0), DomainError);
    EXPECT_THROW(lifetime_years(m, std::nan("")), DomainError);
    LifetimeModel bad = m;
    bad.efficiency = 1.5;
    EXPECT_THROW(lifetime_years(bad, 1.0), ConfigError);
}

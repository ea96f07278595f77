#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wrsim {

using Address = std::uint64_t;
using Bytes = std::uint64_t;
using ObjectId = std::uint64_t;
using InstanceId = std::uint32_t;

inline constexpr Bytes KiB = 1024;
inline constexpr Bytes MiB = 1024 * KiB;
inline constexpr Bytes GiB = 1024 * MiB;

enum class MemoryKind : std::uint8_t { dram = 0, pcm = 1 };
inline constexpr std::size_t kMemoryKindCount = 2;

inline constexpr std::string_view to_string(MemoryKind kind) {
    return kind == MemoryKind::dram ? "DRAM" : "PCM";
}

enum class SpaceName : std::uint8_t {
    boot = 0,
    nursery,
    observer,
    mature_dram,
    mature_pcm,
    los_dram,
    los_pcm,
    meta_dram,
    meta_pcm,
};
inline constexpr std::size_t kSpaceCount = 9;

inline constexpr std::array<SpaceName, kSpaceCount> kAllSpaces = {
    SpaceName::boot,      SpaceName::nursery, SpaceName::observer,
    SpaceName::mature_dram, SpaceName::mature_pcm, SpaceName::los_dram,
    SpaceName::los_pcm,   SpaceName::meta_dram, SpaceName::meta_pcm,
};

inline constexpr std::string_view to_string(SpaceName space) {
    constexpr std::array<std::string_view, kSpaceCount> names = {
        "boot",   "nursery", "observer", "mature-dram", "mature-pcm",
        "los-dram", "los-pcm", "meta-dram", "meta-pcm",
    };
    return names[static_cast<std::size_t>(space)];
}

inline std::optional<SpaceName> parse_space_name(std::string_view text) {
    for (SpaceName s : kAllSpaces) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

constexpr std::size_t index_of(SpaceName s) { return static_cast<std::size_t>(s); }
constexpr std::size_t index_of(MemoryKind k) { return static_cast<std::size_t>(k); }

// Error hierarchy. Every simulator failure derives from SimError so the
// harness can mark a report failed without knowing the exact cause.
class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public SimError {
public:
    using SimError::SimError;
};

class OutOfChunks : public SimError {
public:
    explicit OutOfChunks(MemoryKind kind)
        : SimError("no free chunk on the " + std::string(to_string(kind)) + " free list"),
          kind_(kind) {}
    MemoryKind kind() const noexcept { return kind_; }

private:
    MemoryKind kind_;
};

class RangeError : public SimError {
public:
    using SimError::SimError;
};

class DoubleFree : public SimError {
public:
    using SimError::SimError;
};

class HeapExhausted : public SimError {
public:
    using SimError::SimError;
};

class AllocationFailure : public SimError {
public:
    using SimError::SimError;
};

class UndefinedRate : public SimError {
public:
    using SimError::SimError;
};

class DomainError : public SimError {
public:
    using SimError::SimError;
};

class IoError : public SimError {
public:
    using SimError::SimError;
};

class ParseError : public SimError {
public:
    ParseError(std::size_t line, const std::string& what)
        : SimError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A mutator operation that violates the runtime's preconditions. op_index is
// filled in by the driver when the failing operation came from a stream.
class TraceError : public SimError {
public:
    explicit TraceError(const std::string& what) : SimError(what) {}
    TraceError(const std::string& what, std::size_t op_index)
        : SimError("op " + std::to_string(op_index) + ": " + what), op_index_(op_index) {}
    std::optional<std::size_t> op_index() const noexcept { return op_index_; }

private:
    std::optional<std::size_t> op_index_;
};

class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

#if defined(WRSIM_CHECK_INVARIANTS)
inline constexpr bool kCheckInvariants = true;
#else
inline constexpr bool kCheckInvariants = false;
#endif

inline void invariant(bool condition, const char* what) {
    if (!condition) throw InvariantViolation(what);
}

constexpr Bytes align_up(Bytes value, Bytes alignment) {
    return (value + alignment - 1) / alignment * alignment;
}

constexpr Bytes align_down(Bytes value, Bytes alignment) {
    return value / alignment * alignment;
}

}  // namespace wrsim

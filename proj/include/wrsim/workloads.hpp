#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "wrsim/common.hpp"
#include "wrsim/runtime.hpp"

namespace wrsim {

// ---- trace operations --------------------------------------------------

namespace op {
struct Alloc {
    ObjectId id;
    Bytes size;
    std::uint32_t n_refs;
    bool large;
    friend bool operator==(const Alloc&, const Alloc&) = default;
};
struct Write {
    ObjectId id;
    Bytes offset;
    Bytes len;
    friend bool operator==(const Write&, const Write&) = default;
};
struct Read {
    ObjectId id;
    Bytes offset;
    Bytes len;
    friend bool operator==(const Read&, const Read&) = default;
};
struct PutRef {
    ObjectId parent;
    std::uint32_t slot;
    ObjectId child;  // 0 is null
    friend bool operator==(const PutRef&, const PutRef&) = default;
};
struct Root {
    ObjectId id;
    friend bool operator==(const Root&, const Root&) = default;
};
struct Unroot {
    ObjectId id;
    friend bool operator==(const Unroot&, const Unroot&) = default;
};
}  // namespace op

using TraceOp = std::variant<op::Alloc, op::Write, op::Read, op::PutRef, op::Root, op::Unroot>;
using Trace = std::vector<TraceOp>;

// Bytes an operation touches, for the clock and for statistics.
inline Bytes op_bytes(const TraceOp& o) {
    return std::visit(
        [](const auto& x) -> Bytes {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, op::Alloc>) return x.size;
            else if constexpr (std::is_same_v<T, op::Write> || std::is_same_v<T, op::Read>) return x.len;
            else if constexpr (std::is_same_v<T, op::PutRef>) return 8;
            else return 0;
        },
        o);
}

// ---- text format ---------------------------------------------------------
//
//   A <id> <size> <n_refs> <large 0|1>
//   W <id> <offset> <len>
//   R <id> <offset> <len>
//   P <parent> <slot> <child|0>
//   G <id>          root
//   U <id>          unroot
//
// One op per line, space separated. Blank lines and lines starting with '#'
// are ignored.

inline void append_op(std::string& out, const TraceOp& o) {
    auto num = [&out](std::uint64_t v) {
        out.push_back(' ');
        out += std::to_string(v);
    };
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, op::Alloc>) {
                out.push_back('A');
                num(x.id), num(x.size), num(x.n_refs), num(x.large ? 1 : 0);
            } else if constexpr (std::is_same_v<T, op::Write>) {
                out.push_back('W');
                num(x.id), num(x.offset), num(x.len);
            } else if constexpr (std::is_same_v<T, op::Read>) {
                out.push_back('R');
                num(x.id), num(x.offset), num(x.len);
            } else if constexpr (std::is_same_v<T, op::PutRef>) {
                out.push_back('P');
                num(x.parent), num(x.slot), num(x.child);
            } else if constexpr (std::is_same_v<T, op::Root>) {
                out.push_back('G');
                num(x.id);
            } else {
                out.push_back('U');
                num(x.id);
            }
        },
        o);
    out.push_back('\n');
}

inline std::string serialize_trace(std::span<const TraceOp> ops) {
    std::string out;
    out.reserve(ops.size() * 16);
    for (const auto& o : ops) append_op(out, o);
    return out;
}

inline Trace parse_trace(std::string_view text) {
    Trace ops;
    std::unordered_set<ObjectId> allocated;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos || line[first] == '#') continue;
        line.remove_prefix(first);

        std::vector<std::uint64_t> fields;
        const char code = line[0];
        std::string_view rest = line.substr(1);
        if (!rest.empty() && rest[0] != ' ' && rest[0] != '\t') throw ParseError(line_no, "malformed op code");
        while (true) {
            const auto s = rest.find_first_not_of(" \t");
            if (s == std::string_view::npos) break;
            rest.remove_prefix(s);
            const auto e = std::min(rest.find_first_of(" \t"), rest.size());
            std::uint64_t v = 0;
            const auto token = rest.substr(0, e);
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec != std::errc{} || ptr != token.data() + token.size()) {
                throw ParseError(line_no, "expected an unsigned integer, got '" + std::string(token) + "'");
            }
            fields.push_back(v);
            rest.remove_prefix(e);
        }

        auto expect = [&](std::size_t n) {
            if (fields.size() != n) {
                throw ParseError(line_no, std::string("op '") + code + "' takes " + std::to_string(n) + " fields");
            }
        };
        auto known = [&](ObjectId id) {
            if (id == 0) throw ParseError(line_no, "object id 0 is reserved for null");
            if (!allocated.count(id)) {
                throw TraceError("line " + std::to_string(line_no) + ": reference to unallocated object " +
                                 std::to_string(id));
            }
        };
        auto slot32 = [&](std::uint64_t v) {
            if (v > UINT32_MAX) throw ParseError(line_no, "slot or reference count too large");
            return static_cast<std::uint32_t>(v);
        };
        switch (code) {
            case 'A': {
                expect(4);
                if (fields[0] == 0) throw ParseError(line_no, "object id 0 is reserved for null");
                if (fields[1] == 0) throw ParseError(line_no, "zero-sized allocation");
                if (fields[3] > 1) throw ParseError(line_no, "large flag must be 0 or 1");
                if (!allocated.insert(fields[0]).second) {
                    throw TraceError("line " + std::to_string(line_no) + ": object " + std::to_string(fields[0]) +
                                     " allocated twice");
                }
                ops.push_back(op::Alloc{fields[0], fields[1], slot32(fields[2]), fields[3] == 1});
                break;
            }
            case 'W':
            case 'R': {
                expect(3);
                known(fields[0]);
                if (fields[2] == 0) throw ParseError(line_no, "zero-length access");
                if (code == 'W') ops.push_back(op::Write{fields[0], fields[1], fields[2]});
                else ops.push_back(op::Read{fields[0], fields[1], fields[2]});
                break;
            }
            case 'P': {
                expect(3);
                known(fields[0]);
                if (fields[2] != 0) known(fields[2]);
                ops.push_back(op::PutRef{fields[0], slot32(fields[1]), fields[2]});
                break;
            }
            case 'G':
            case 'U': {
                expect(1);
                known(fields[0]);
                if (code == 'G') ops.push_back(op::Root{fields[0]});
                else ops.push_back(op::Unroot{fields[0]});
                break;
            }
            default: throw ParseError(line_no, std::string("unknown op code '") + code + "'");
        }
    }
    return ops;
}

// ---- synthetic workloads -------------------------------------------------

enum class Archetype : std::uint8_t { nursery_churn, mature_mutation, large_object_graph };

inline constexpr std::string_view to_string(Archetype a) {
    switch (a) {
        case Archetype::nursery_churn: return "nursery-churn";
        case Archetype::mature_mutation: return "mature-mutation";
        case Archetype::large_object_graph: return "large-object-graph";
    }
    return "?";
}

inline Archetype parse_archetype(std::string_view s) {
    for (Archetype a : {Archetype::nursery_churn, Archetype::mature_mutation, Archetype::large_object_graph})
        if (to_string(a) == s) return a;
    throw ConfigError("unknown workload archetype '" + std::string(s) + "'");
}

struct WorkloadSpec {
    Archetype archetype = Archetype::nursery_churn;
    std::uint64_t op_count = 200'000;
    std::uint64_t seed = 1;

    // Small-object sizes are log-normal in bytes.
    double size_log_mean = 5.0;
    double size_log_sigma = 0.7;
    std::uint32_t max_refs = 3;

    // Probability that a local, when it leaves the mutator's working window,
    // is published into a long-lived container and so survives.
    double survival = 0.03;
    // Fraction of data writes aimed at published (older) objects.
    double old_write_fraction = 0.05;
    // Fraction of those old-object writes that hit the hot slots.
    double mutation_locality = 0.8;
    double hot_fraction = 0.1;

    double large_fraction = 0.0;
    Bytes large_min = 16 * KiB;
    Bytes large_max = 128 * KiB;
    double large_survival = 0.0;

    std::uint32_t window = 64;
    std::uint32_t containers = 8;
    std::uint32_t container_slots = 512;

    // Mean mutator operations issued per allocation.
    double writes_per_alloc = 1.5;
    double reads_per_alloc = 0.5;
    double links_per_alloc = 0.3;

    // The generator ends a mutation epoch (drops every local) before the
    // small-object allocation that would overflow this many bytes.
    Bytes epoch_bytes = 4 * MiB;
    Bytes large_threshold = 8 * KiB;
    Bytes header_size = 16;
    Bytes slot_size = 8;

    void validate() const {
        auto prob = [](double p, const char* what) {
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
        };
        if (op_count == 0) throw ConfigError("op_count must be positive");
        prob(survival, "survival");
        prob(old_write_fraction, "old_write_fraction");
        prob(mutation_locality, "mutation_locality");
        prob(hot_fraction, "hot_fraction");
        prob(large_fraction, "large_fraction");
        prob(large_survival, "large_survival");
        if (!(size_log_sigma >= 0.0) || !std::isfinite(size_log_mean)) {
            throw ConfigError("invalid log-normal size parameters");
        }
        if (large_min == 0 || large_min > large_max) throw ConfigError("invalid large-object size range");
        if (window == 0) throw ConfigError("window must be positive");
        if (epoch_bytes == 0) throw ConfigError("epoch_bytes must be positive");
        if ((survival > 0 || large_survival > 0 || old_write_fraction > 0) && (containers == 0 || container_slots == 0)) {
            throw ConfigError("surviving objects need at least one container slot");
        }
        if (header_size + slot_size * container_slots >= large_threshold) {
            throw ConfigError("containers must stay below the large-object threshold");
        }
        if (writes_per_alloc < 0 || reads_per_alloc < 0 || links_per_alloc < 0) {
            throw ConfigError("operation rates must be non-negative");
        }
    }
};

// Archetype defaults. Nursery-churn mimics allocation-heavy programs where
// nearly everything dies young; mature-mutation writes mostly into older
// objects; large-object-graph allocates large arrays frequently.
inline WorkloadSpec default_workload(Archetype a) {
    WorkloadSpec s;
    s.archetype = a;
    switch (a) {
        case Archetype::nursery_churn:
            s.op_count = 600'000;
            s.size_log_mean = 5.6;
            s.size_log_sigma = 0.8;
            s.survival = 0.03;
            s.old_write_fraction = 0.05;
            break;
        case Archetype::mature_mutation:
            s.op_count = 1'000'000;
            s.size_log_mean = 5.6;
            s.size_log_sigma = 0.6;
            s.survival = 0.3;
            s.old_write_fraction = 0.75;
            s.mutation_locality = 0.8;
            s.hot_fraction = 0.05;
            s.containers = 16;
            s.container_slots = 512;
            s.writes_per_alloc = 3.0;
            s.reads_per_alloc = 1.0;
            break;
        case Archetype::large_object_graph:
            s.op_count = 300'000;
            s.size_log_mean = 4.5;
            s.size_log_sigma = 0.5;
            s.survival = 0.02;
            s.large_fraction = 0.05;
            s.large_min = 16 * KiB;
            s.large_max = 128 * KiB;
            s.large_survival = 0.1;
            s.old_write_fraction = 0.4;
            s.containers = 2;
            s.container_slots = 64;
            s.writes_per_alloc = 2.0;
            s.epoch_bytes = 32 * MiB;
            break;
    }
    return s;
}

namespace detail {

// Portable draws on top of mt19937_64, whose output sequence the standard
// fixes; the standard distributions are implementation-defined.
class Draw {
public:
    explicit Draw(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return uniform() < p; }
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
    // Integer count with the given mean: floor plus a Bernoulli remainder.
    std::uint64_t count(double mean) {
        const double whole = std::floor(mean);
        return static_cast<std::uint64_t>(whole) + (chance(mean - whole) ? 1 : 0);
    }

private:
    std::mt19937_64 engine_;
};

// The generator's own model of the heap graph. Edges only run from
// containers to published objects and from newer locals to older ones, so
// the graph is acyclic and reference counts give exact liveness.
class Generator {
public:
    explicit Generator(const WorkloadSpec& spec) : spec_(spec), draw_(spec.seed) {}

    Trace run() {
        make_containers();
        while (ops_.size() < spec_.op_count) {
            allocate();
            for (auto n = draw_.count(spec_.writes_per_alloc); n > 0; --n) write();
            for (auto n = draw_.count(spec_.reads_per_alloc); n > 0; --n) read();
            for (auto n = draw_.count(spec_.links_per_alloc); n > 0; --n) link();
        }
        ops_.resize(spec_.op_count);
        return std::move(ops_);
    }

private:
    struct Node {
        Bytes size = 0;
        std::vector<ObjectId> slots;
        std::uint32_t in_refs = 0;
        bool rooted = false;
    };

    Bytes effective_size(Bytes size, std::uint32_t n_refs) const {
        return align_up(std::max(size, spec_.header_size + spec_.slot_size * n_refs), 8);
    }

    ObjectId new_object(Bytes size, std::uint32_t n_refs) {
        const ObjectId id = next_id_++;
        ops_.push_back(op::Alloc{id, size, n_refs, false});
        Node n;
        n.size = effective_size(size, n_refs);
        n.slots.assign(n_refs, 0);
        nodes_.emplace(id, std::move(n));
        return id;
    }

    void root(ObjectId id) {
        ops_.push_back(op::Root{id});
        nodes_.at(id).rooted = true;
    }

    void unroot(ObjectId id) {
        ops_.push_back(op::Unroot{id});
        Node& n = nodes_.at(id);
        n.rooted = false;
        maybe_die(id);
    }

    void maybe_die(ObjectId id) {
        std::vector<ObjectId> stack{id};
        while (!stack.empty()) {
            const ObjectId cur = stack.back();
            stack.pop_back();
            auto it = nodes_.find(cur);
            if (it == nodes_.end() || it->second.rooted || it->second.in_refs > 0) continue;
            for (ObjectId child : it->second.slots) {
                if (child == 0) continue;
                --nodes_.at(child).in_refs;
                stack.push_back(child);
            }
            nodes_.erase(it);
        }
    }

    void put(ObjectId parent, std::uint32_t slot, ObjectId child) {
        ops_.push_back(op::PutRef{parent, slot, child});
        Node& p = nodes_.at(parent);
        const ObjectId old = p.slots[slot];
        p.slots[slot] = child;
        if (child != 0) ++nodes_.at(child).in_refs;
        if (old != 0) {
            --nodes_.at(old).in_refs;
            maybe_die(old);
        }
    }

    void make_containers() {
        const bool need = spec_.survival > 0 || spec_.large_survival > 0 || spec_.old_write_fraction > 0;
        if (!need) return;
        for (std::uint32_t c = 0; c < spec_.containers; ++c) {
            const ObjectId id = new_object(spec_.header_size + spec_.slot_size * spec_.container_slots,
                                           spec_.container_slots);
            root(id);
            containers_.push_back(id);
            note_small(nodes_.at(id).size);
        }
        hot_slots_ = std::max<std::uint32_t>(
            1, static_cast<std::uint32_t>(spec_.hot_fraction * static_cast<double>(spec_.container_slots)));
    }

    void note_small(Bytes bytes) {
        if (epoch_cursor_ + bytes > spec_.epoch_bytes) end_epoch();
        epoch_cursor_ += bytes;
    }

    void end_epoch() {
        while (!locals_.empty()) {
            const ObjectId id = locals_.front();
            locals_.pop_front();
            unroot(id);
        }
        epoch_cursor_ = 0;
    }

    void allocate() {
        const bool large = spec_.large_fraction > 0 && draw_.chance(spec_.large_fraction);
        Bytes size = 0;
        std::uint32_t refs = 0;
        if (large) {
            size = draw_.between(spec_.large_min, spec_.large_max);
        } else {
            const double s = std::exp(spec_.size_log_mean + spec_.size_log_sigma * draw_.normal());
            const Bytes cap = spec_.large_threshold - 8;
            size = std::clamp<Bytes>(static_cast<Bytes>(s), spec_.header_size, cap);
            refs = static_cast<std::uint32_t>(
                std::min<Bytes>(draw_.below(spec_.max_refs + 1), (size - spec_.header_size) / spec_.slot_size));
        }
        if (!large) note_small(effective_size(size, refs));
        const ObjectId id = new_object(size, refs);
        root(id);
        locals_.push_back(id);
        if (locals_.size() > spec_.window) retire_oldest_local();
    }

    void retire_oldest_local() {
        const ObjectId id = locals_.front();
        locals_.pop_front();
        const bool large = nodes_.at(id).size >= spec_.large_threshold;
        const double p = large ? spec_.large_survival : spec_.survival;
        if (!containers_.empty() && p > 0 && draw_.chance(p)) {
            const ObjectId c = containers_[draw_.below(containers_.size())];
            auto slot = static_cast<std::uint32_t>(draw_.below(spec_.container_slots));
            // Occupied hot slots keep their long-lived residents.
            if (slot < hot_slots_ && nodes_.at(c).slots[slot] != 0 && hot_slots_ < spec_.container_slots) {
                slot = hot_slots_ + static_cast<std::uint32_t>(draw_.below(spec_.container_slots - hot_slots_));
            }
            put(c, slot, id);
        }
        unroot(id);
    }

    // Picks an object reachable through a container slot, or 0.
    ObjectId pick_old() {
        if (containers_.empty()) return 0;
        const bool hot = draw_.chance(spec_.mutation_locality);
        const std::uint32_t range = hot ? hot_slots_ : spec_.container_slots;
        for (int attempt = 0; attempt < 4; ++attempt) {
            const ObjectId c = containers_[draw_.below(containers_.size())];
            const ObjectId id = nodes_.at(c).slots[draw_.below(range)];
            if (id != 0) return id;
        }
        return 0;
    }

    ObjectId pick_local() {
        if (locals_.empty()) return 0;
        return locals_[draw_.below(locals_.size())];
    }

    ObjectId pick_target() {
        ObjectId id = 0;
        if (spec_.old_write_fraction > 0 && draw_.chance(spec_.old_write_fraction)) id = pick_old();
        if (id == 0) id = pick_local();
        return id;
    }

    void access(bool is_write) {
        const ObjectId id = pick_target();
        if (id == 0) return;
        const Bytes size = nodes_.at(id).size;
        const Bytes max_len = size >= spec_.large_threshold ? 512 : 64;
        const Bytes len = std::min<Bytes>(size, Bytes{8} << draw_.below(4 + (max_len == 512 ? 3 : 0)));
        const Bytes offset = align_down(draw_.below(size - len + 1), 8);
        if (is_write) ops_.push_back(op::Write{id, offset, len});
        else ops_.push_back(op::Read{id, offset, len});
    }

    void write() { access(true); }
    void read() { access(false); }

    void link() {
        if (locals_.size() < 2) return;
        const ObjectId parent = locals_.back();
        Node& p = nodes_.at(parent);
        if (p.slots.empty()) return;
        const ObjectId child = locals_[draw_.below(locals_.size() - 1)];
        put(parent, static_cast<std::uint32_t>(draw_.below(p.slots.size())), child);
    }

    const WorkloadSpec& spec_;
    Draw draw_;
    Trace ops_;
    std::unordered_map<ObjectId, Node> nodes_;
    std::deque<ObjectId> locals_;
    std::vector<ObjectId> containers_;
    std::uint32_t hot_slots_ = 1;
    ObjectId next_id_ = 1;
    Bytes epoch_cursor_ = 0;
};

}  // namespace detail

inline Trace generate(const WorkloadSpec& spec) {
    spec.validate();
    return detail::Generator(spec).run();
}

// ---- driving an instance ---------------------------------------------------

struct TraceCursor {
    std::span<const TraceOp> ops;
    std::size_t position = 0;
    bool done() const { return position >= ops.size(); }
};

enum class DriveStatus : std::uint8_t { exhausted, yielded };

inline void execute(Instance& instance, const TraceOp& o) {
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, op::Alloc>) instance.alloc_object(x.id, x.size, x.n_refs, x.large);
            else if constexpr (std::is_same_v<T, op::Write>) instance.write_data(x.id, x.offset, x.len);
            else if constexpr (std::is_same_v<T, op::Read>) instance.read_data(x.id, x.offset, x.len);
            else if constexpr (std::is_same_v<T, op::PutRef>) instance.write_ref(x.parent, x.slot, x.child);
            else if constexpr (std::is_same_v<T, op::Root>) instance.set_root(x.id, true);
            else instance.set_root(x.id, false);
        },
        o);
}

// Executes up to `quantum` operations. Trace errors are re-raised carrying
// the index of the failing operation; the cursor stays on that operation.
inline DriveStatus drive(Instance& instance, TraceCursor& cursor, std::size_t quantum) {
    for (std::size_t n = 0; n < quantum && !cursor.done(); ++n) {
        try {
            execute(instance, cursor.ops[cursor.position]);
        } catch (const TraceError& e) {
            if (e.op_index()) throw;
            throw TraceError(e.what(), cursor.position);
        }
        ++cursor.position;
    }
    return cursor.done() ? DriveStatus::exhausted : DriveStatus::yielded;
}

}  // namespace wrsim

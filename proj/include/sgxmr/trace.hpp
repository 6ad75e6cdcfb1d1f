#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sgxmr {

enum class Region : uint8_t { untrusted = 0, enclave = 1 };
enum class Granularity : uint8_t { block = 0, record = 1 };
enum class AccessOp : uint8_t { read = 0, write = 1 };

inline constexpr uint32_t kNoRecord = 0xFFFFFFFFu;

/// One block- or record-granularity access on either side of the
/// trusted/untrusted boundary. Addresses are (file_id, block_id) for
/// block events and (file_id, block_id, record_index) for record events.
struct TraceEvent {
    uint64_t seq = 0;
    uint64_t file_id = 0;
    uint64_t block_id = 0;
    uint32_t record_index = kNoRecord;
    Region region = Region::untrusted;
    Granularity granularity = Granularity::block;
    AccessOp op = AccessOp::read;

    /// Address-only equality; seq is ordering metadata, not identity.
    bool same_access(const TraceEvent& other) const {
        return region == other.region && granularity == other.granularity &&
               op == other.op && file_id == other.file_id &&
               block_id == other.block_id && record_index == other.record_index;
    }
};

struct PhaseMark {
    std::string name;
    uint64_t begin_seq = 0;
};

struct Trace {
    std::vector<TraceEvent> events;
    std::vector<PhaseMark> phases;  // ordered by begin_seq; partition the events

    const std::string& phase_of(uint64_t seq) const;

    /// Line format: seq region granularity op file_id block_id [record_index] phase
    void write_text(std::ostream& os) const;
};

/// Access counts keyed by (region, granularity, op), overall and per phase.
struct TraceStats {
    std::array<std::array<std::array<uint64_t, 2>, 2>, 2> counts{};
    std::map<std::string, std::array<std::array<std::array<uint64_t, 2>, 2>, 2>>
        per_phase;

    uint64_t get(Region r, Granularity g, AccessOp o) const {
        return counts[static_cast<size_t>(r)][static_cast<size_t>(g)]
                     [static_cast<size_t>(o)];
    }
    uint64_t total() const;

    uint64_t untrusted_block_reads() const {
        return get(Region::untrusted, Granularity::block, AccessOp::read);
    }
    uint64_t untrusted_block_writes() const {
        return get(Region::untrusted, Granularity::block, AccessOp::write);
    }
    uint64_t enclave_record_touches() const {
        return get(Region::enclave, Granularity::record, AccessOp::read) +
               get(Region::enclave, Granularity::record, AccessOp::write);
    }
};

TraceStats trace_stats(const Trace& trace);

/// Process-wide access recorder. Operations emit through it unconditionally;
/// when no capture is active the events are dropped, so instrumentation is
/// observationally transparent.
class TraceRecorder {
  public:
    static TraceRecorder& instance();

    void emit(Region region, Granularity granularity, AccessOp op,
              uint64_t file_id, uint64_t block_id,
              uint32_t record_index = kNoRecord);

    /// Labels all subsequent events until the next set_phase call.
    void set_phase(const std::string& name);

    bool active() const { return mode_ != Mode::off; }

  private:
    enum class Mode { off, full, counting };

    TraceRecorder() = default;

    friend Trace capture(const std::function<void()>& program);
    friend TraceStats capture_stats(const std::function<void()>& program);

    Mode mode_ = Mode::off;
    uint64_t next_seq_ = 0;
    Trace trace_;
    TraceStats stats_;
    std::string current_phase_;
};

/// Runs the program with full event recording. Throws std::logic_error on
/// nested capture; single-threaded by contract.
Trace capture(const std::function<void()>& program);

/// Runs the program tallying counts only; no per-event storage. Use for
/// large benchmark runs where a full trace would not fit in memory.
TraceStats capture_stats(const std::function<void()>& program);

/// Convenience wrapper for phase labelling inside captured programs.
inline void trace_phase(const std::string& name) {
    TraceRecorder::instance().set_phase(name);
}

}  // namespace sgxmr

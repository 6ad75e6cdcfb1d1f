#include "sgxmr/trace.hpp"

#include <ostream>
#include <stdexcept>

namespace sgxmr {

namespace {

const std::string kNoPhase = "-";

const char* region_name(Region r) {
    return r == Region::untrusted ? "untrusted" : "enclave";
}
const char* granularity_name(Granularity g) {
    return g == Granularity::block ? "block" : "record";
}
const char* op_name(AccessOp o) { return o == AccessOp::read ? "read" : "write"; }

}  // namespace

const std::string& Trace::phase_of(uint64_t seq) const {
    const std::string* found = &kNoPhase;
    for (const PhaseMark& mark : phases) {
        if (mark.begin_seq > seq) break;
        found = &mark.name;
    }
    return *found;
}

void Trace::write_text(std::ostream& os) const {
    for (const TraceEvent& ev : events) {
        os << ev.seq << ' ' << region_name(ev.region) << ' '
           << granularity_name(ev.granularity) << ' ' << op_name(ev.op) << ' '
           << ev.file_id << ' ' << ev.block_id;
        if (ev.granularity == Granularity::record) os << ' ' << ev.record_index;
        os << ' ' << phase_of(ev.seq) << '\n';
    }
}

uint64_t TraceStats::total() const {
    uint64_t sum = 0;
    for (const auto& g : counts)
        for (const auto& o : g)
            for (uint64_t c : o) sum += c;
    return sum;
}

TraceStats trace_stats(const Trace& trace) {
    TraceStats stats;
    for (const TraceEvent& ev : trace.events) {
        const size_t r = static_cast<size_t>(ev.region);
        const size_t g = static_cast<size_t>(ev.granularity);
        const size_t o = static_cast<size_t>(ev.op);
        stats.counts[r][g][o]++;
        stats.per_phase[trace.phase_of(ev.seq)][r][g][o]++;
    }
    return stats;
}

TraceRecorder& TraceRecorder::instance() {
    static TraceRecorder recorder;
    return recorder;
}

void TraceRecorder::emit(Region region, Granularity granularity, AccessOp op,
                         uint64_t file_id, uint64_t block_id,
                         uint32_t record_index) {
    if (mode_ == Mode::off) return;
    const size_t r = static_cast<size_t>(region);
    const size_t g = static_cast<size_t>(granularity);
    const size_t o = static_cast<size_t>(op);
    if (mode_ == Mode::full) {
        trace_.events.push_back(TraceEvent{next_seq_, file_id, block_id,
                                           record_index, region, granularity,
                                           op});
    } else {
        stats_.counts[r][g][o]++;
        stats_.per_phase[current_phase_][r][g][o]++;
    }
    next_seq_++;
}

void TraceRecorder::set_phase(const std::string& name) {
    if (mode_ == Mode::off) return;
    current_phase_ = name;
    if (mode_ == Mode::full)
        trace_.phases.push_back(PhaseMark{name, next_seq_});
}

Trace capture(const std::function<void()>& program) {
    TraceRecorder& rec = TraceRecorder::instance();
    if (rec.mode_ != TraceRecorder::Mode::off)
        throw std::logic_error("nested trace capture");
    rec.mode_ = TraceRecorder::Mode::full;
    rec.next_seq_ = 0;
    rec.trace_ = Trace{};
    rec.current_phase_ = kNoPhase;
    try {
        program();
    } catch (...) {
        rec.mode_ = TraceRecorder::Mode::off;
        throw;
    }
    rec.mode_ = TraceRecorder::Mode::off;
    return std::move(rec.trace_);
}

TraceStats capture_stats(const std::function<void()>& program) {
    TraceRecorder& rec = TraceRecorder::instance();
    if (rec.mode_ != TraceRecorder::Mode::off)
        throw std::logic_error("nested trace capture");
    rec.mode_ = TraceRecorder::Mode::counting;
    rec.next_seq_ = 0;
    rec.stats_ = TraceStats{};
    rec.current_phase_ = kNoPhase;
    try {
        program();
    } catch (...) {
        rec.mode_ = TraceRecorder::Mode::off;
        throw;
    }
    rec.mode_ = TraceRecorder::Mode::off;
    return std::move(rec.stats_);
}

}  // namespace sgxmr

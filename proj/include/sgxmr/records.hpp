#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgxmr/block_store.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr {

/// Fixed key field width shared by every record in the system. Keys compare
/// lexicographically; the all-0xFF key is the dummy sentinel and sorts
/// strictly after any real key.
inline constexpr uint32_t kKeyWidth = 16;

/// Reserved file id for enclave-resident scratch records (running
/// aggregates, sort padding slots, lookahead registers). Scratch addresses
/// are assigned deterministically per operation so traces stay comparable.
inline constexpr uint64_t kScratchFileId = ~0ull;

/// One addressable record: a byte span plus the (file, block, index)
/// identity the trace auditor sees when it is touched.
struct RecordSlot {
    uint8_t* data = nullptr;
    uint32_t size = 0;
    uint64_t file_id = 0;
    uint64_t block_id = 0;
    uint32_t index = 0;

    std::span<uint8_t> bytes() const { return {data, size}; }
    std::span<uint8_t> key() const { return {data, kKeyWidth}; }
    std::span<uint8_t> value() const { return {data + kKeyWidth, size - kKeyWidth}; }
};

/// Emits the enclave-region record-granularity event for one access. Every
/// record access in the engine funnels through here.
inline void touch_record(const RecordSlot& slot, AccessOp op) {
    TraceRecorder::instance().emit(Region::enclave, Granularity::record, op,
                                   slot.file_id, slot.block_id, slot.index);
}

/// Decrypted block resident in the simulated enclave. The payload holds
/// records_per_block fixed-size records plus an optional zero tail when the
/// payload size is not a record multiple.
struct PlainBlock {
    uint64_t file_id = 0;
    uint64_t block_id = 0;
    uint32_t record_size = 0;
    uint32_t records_per_block = 0;
    std::vector<uint8_t> payload;

    static PlainBlock blank(uint64_t file_id, uint64_t block_id,
                            const BlockFileMeta& meta);

    RecordSlot slot(uint32_t record_index);

    /// Spec-level touch hook: validates the index and emits the event.
    void touch(uint32_t record_index, AccessOp op);
};

/// Enclave-resident single-record storage with a deterministic scratch
/// address, for registers that live outside any block.
class ScratchRecord {
  public:
    ScratchRecord(uint64_t scratch_id, uint32_t record_size)
        : buf_(record_size, 0), scratch_id_(scratch_id) {}

    RecordSlot slot() {
        return RecordSlot{buf_.data(), static_cast<uint32_t>(buf_.size()),
                          kScratchFileId, scratch_id_, 0};
    }

  private:
    std::vector<uint8_t> buf_;
    uint64_t scratch_id_;
};

// Raw (untraced) record helpers, for encode/decode paths and tests. Inside
// traced engine phases use the ct_* operations from oblivious.hpp instead.
void write_dummy(std::span<uint8_t> record);
bool record_is_dummy(std::span<const uint8_t> record);

}  // namespace sgxmr

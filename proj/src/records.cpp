#include "sgxmr/records.hpp"

#include <cstring>
#include <stdexcept>

namespace sgxmr {

PlainBlock PlainBlock::blank(uint64_t file_id, uint64_t block_id,
                             const BlockFileMeta& meta) {
    PlainBlock block;
    block.file_id = file_id;
    block.block_id = block_id;
    block.record_size = meta.record_size;
    block.records_per_block = meta.records_per_block;
    block.payload.assign(meta.payload_size, 0);
    for (uint32_t i = 0; i < meta.records_per_block; ++i)
        write_dummy(block.slot(i).bytes());
    return block;
}

RecordSlot PlainBlock::slot(uint32_t record_index) {
    if (record_index >= records_per_block)
        throw std::out_of_range("record index out of range");
    return RecordSlot{payload.data() + record_index * record_size, record_size,
                      file_id, block_id, record_index};
}

void PlainBlock::touch(uint32_t record_index, AccessOp op) {
    touch_record(slot(record_index), op);
}

void write_dummy(std::span<uint8_t> record) {
    std::memset(record.data(), 0xFF, kKeyWidth);
    std::memset(record.data() + kKeyWidth, 0, record.size() - kKeyWidth);
}

bool record_is_dummy(std::span<const uint8_t> record) {
    for (uint32_t i = 0; i < kKeyWidth; ++i)
        if (record[i] != 0xFF) return false;
    return true;
}

}  // namespace sgxmr

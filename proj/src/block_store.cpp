#include "sgxmr/block_store.hpp"

#include <cstring>
#include <stdexcept>

namespace sgxmr {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'M', 'R'};
constexpr uint16_t kVersion = 1;
constexpr size_t kSuperblockSize = 4 + 2 + 4 + 4 + 8 + 16;
constexpr size_t kReservedOffset = 22;

template <typename T>
void put_le(uint8_t* dst, T value) {
    for (size_t i = 0; i < sizeof(T); ++i)
        dst[i] = static_cast<uint8_t>(value >> (8 * i));
}

template <typename T>
T get_le(const uint8_t* src) {
    T value = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        value |= static_cast<T>(src[i]) << (8 * i);
    return value;
}

}  // namespace

BlockFileMeta BlockFileMeta::exact(uint32_t record_size,
                                   uint32_t records_per_block) {
    BlockFileMeta meta{record_size, records_per_block,
                       record_size * records_per_block};
    meta.validate();
    return meta;
}

BlockFileMeta BlockFileMeta::for_block_size(uint32_t block_payload,
                                            uint32_t record_size) {
    if (record_size == 0 || block_payload < record_size)
        throw std::invalid_argument("block payload smaller than one record");
    BlockFileMeta meta{record_size, block_payload / record_size, block_payload};
    meta.validate();
    return meta;
}

BlockFileMeta BlockFileMeta::for_records_per_block(uint32_t block_payload,
                                                   uint32_t records_per_block) {
    if (records_per_block == 0 || block_payload < records_per_block)
        throw std::invalid_argument("block payload too small for record count");
    BlockFileMeta meta{block_payload / records_per_block, records_per_block,
                       block_payload};
    meta.validate();
    return meta;
}

void BlockFileMeta::validate() const {
    // 16-byte key field plus at least one value byte; see records.hpp.
    if (record_size < 17)
        throw std::invalid_argument("record_size must be at least 17 bytes");
    if (records_per_block < 1)
        throw std::invalid_argument("records_per_block must be at least 1");
    const uint64_t used =
        static_cast<uint64_t>(record_size) * records_per_block;
    if (payload_size < used || payload_size >= used + record_size)
        throw std::invalid_argument(
            "payload_size inconsistent with record_size * records_per_block");
}

BlockFile BlockFile::create(const std::filesystem::path& path,
                            const BlockFileMeta& meta) {
    meta.validate();
    BlockFile file;
    file.path_ = path;
    file.meta_ = meta;
    file.block_count_ = 0;
    file.stream_.open(path, std::ios::binary | std::ios::in | std::ios::out |
                                std::ios::trunc);
    if (!file.stream_)
        throw std::runtime_error("cannot create block file: " + path.string());

    uint8_t super[kSuperblockSize] = {};
    std::memcpy(super, kMagic, 4);
    put_le<uint16_t>(super + 4, kVersion);
    put_le<uint32_t>(super + 6, meta.record_size);
    put_le<uint32_t>(super + 10, meta.records_per_block);
    put_le<uint64_t>(super + 14, 0);
    put_le<uint32_t>(super + kReservedOffset, meta.payload_size);
    file.stream_.write(reinterpret_cast<const char*>(super), kSuperblockSize);
    file.stream_.flush();
    if (!file.stream_)
        throw std::runtime_error("cannot write superblock: " + path.string());
    return file;
}

BlockFile BlockFile::open(const std::filesystem::path& path) {
    BlockFile file;
    file.path_ = path;
    file.stream_.open(path, std::ios::binary | std::ios::in | std::ios::out);
    if (!file.stream_)
        throw std::runtime_error("cannot open block file: " + path.string());

    uint8_t super[kSuperblockSize] = {};
    file.stream_.read(reinterpret_cast<char*>(super), kSuperblockSize);
    if (!file.stream_ || std::memcmp(super, kMagic, 4) != 0)
        throw std::runtime_error("not a block file: " + path.string());
    if (get_le<uint16_t>(super + 4) != kVersion)
        throw std::runtime_error("unsupported block file version");
    file.meta_.record_size = get_le<uint32_t>(super + 6);
    file.meta_.records_per_block = get_le<uint32_t>(super + 10);
    file.block_count_ = get_le<uint64_t>(super + 14);
    file.meta_.payload_size = get_le<uint32_t>(super + kReservedOffset);
    file.meta_.validate();
    return file;
}

uint64_t BlockFile::block_offset(uint64_t index) const {
    return kSuperblockSize + index * (kBlockOverhead + meta_.payload_size);
}

SealedBlock BlockFile::read_block(uint64_t index) {
    if (index >= block_count_)
        throw std::out_of_range("block index out of range");
    SealedBlock block;
    block.ciphertext.resize(meta_.payload_size);
    stream_.seekg(static_cast<std::streamoff>(block_offset(index)));
    uint8_t head[8 + 8];
    stream_.read(reinterpret_cast<char*>(head), sizeof(head));
    stream_.read(reinterpret_cast<char*>(block.header.nonce.data()),
                 kNonceSize);
    stream_.read(reinterpret_cast<char*>(block.ciphertext.data()),
                 meta_.payload_size);
    stream_.read(reinterpret_cast<char*>(block.auth_tag.data()), kAuthTagSize);
    if (!stream_)
        throw std::runtime_error("block read failed: " + path_.string());
    block.header.file_id = get_le<uint64_t>(head);
    block.header.block_id = get_le<uint64_t>(head + 8);
    TraceRecorder::instance().emit(Region::untrusted, Granularity::block,
                                   AccessOp::read, block.header.file_id, index);
    return block;
}

void BlockFile::write_block(uint64_t index, const SealedBlock& block) {
    if (index > block_count_)
        throw std::out_of_range("block index gap");
    if (block.ciphertext.size() != meta_.payload_size)
        throw std::invalid_argument("sealed payload size mismatch");
    uint8_t head[8 + 8];
    put_le<uint64_t>(head, block.header.file_id);
    put_le<uint64_t>(head + 8, block.header.block_id);
    stream_.seekp(static_cast<std::streamoff>(block_offset(index)));
    stream_.write(reinterpret_cast<const char*>(head), sizeof(head));
    stream_.write(reinterpret_cast<const char*>(block.header.nonce.data()),
                  kNonceSize);
    stream_.write(reinterpret_cast<const char*>(block.ciphertext.data()),
                  meta_.payload_size);
    stream_.write(reinterpret_cast<const char*>(block.auth_tag.data()),
                  kAuthTagSize);
    if (!stream_)
        throw std::runtime_error("block write failed: " + path_.string());
    if (index == block_count_) {
        block_count_++;
        persist_block_count();
    }
    stream_.flush();
    TraceRecorder::instance().emit(Region::untrusted, Granularity::block,
                                   AccessOp::write, block.header.file_id,
                                   index);
}

void BlockFile::persist_block_count() {
    uint8_t buf[8];
    put_le<uint64_t>(buf, block_count_);
    stream_.seekp(14);
    stream_.write(reinterpret_cast<const char*>(buf), sizeof(buf));
}

}  // namespace sgxmr

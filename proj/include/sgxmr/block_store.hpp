#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "sgxmr/crypto.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr {

/// Cleartext block addressing: the untrusted side needs it to place blocks,
/// the enclave binds it into the authentication tag as associated data.
struct BlockHeader {
    uint64_t file_id = 0;
    uint64_t block_id = 0;
    Nonce nonce{};
};

inline constexpr size_t kBlockOverhead = 8 + 8 + kNonceSize + kAuthTagSize;

/// Encrypted, MAC-protected fixed-size storage unit. Every sealed block of a
/// file serializes to exactly the same length.
struct SealedBlock {
    BlockHeader header;
    std::vector<uint8_t> ciphertext;  // exactly payload_size bytes
    AuthTag auth_tag{};

    size_t serialized_size() const { return kBlockOverhead + ciphertext.size(); }
};

/// Fixed geometry of a block file. payload_size may exceed
/// record_size * records_per_block by a sub-record tail that is kept zero,
/// so a user-facing block size like 2 KB can hold 30 68-byte records.
struct BlockFileMeta {
    uint32_t record_size = 0;
    uint32_t records_per_block = 0;
    uint32_t payload_size = 0;

    static BlockFileMeta exact(uint32_t record_size, uint32_t records_per_block);
    /// records_per_block = floor(block_payload / record_size)
    static BlockFileMeta for_block_size(uint32_t block_payload,
                                        uint32_t record_size);
    /// record_size = floor(block_payload / records_per_block)
    static BlockFileMeta for_records_per_block(uint32_t block_payload,
                                               uint32_t records_per_block);

    void validate() const;  // throws std::invalid_argument
    bool operator==(const BlockFileMeta&) const = default;
};

/// Untrusted-side storage of sealed blocks, the only code in the engine that
/// touches persistent bytes. On-disk layout, little-endian:
///
///   superblock: magic "SGMR" | version u16 | record_size u32 |
///               records_per_block u32 | block_count u64 | reserved 16B
///   blocks:     file_id u64 | block_id u64 | nonce 12B |
///               ciphertext payload_size B | auth_tag 16B
///
/// The first four reserved bytes persist payload_size. Indexed access is
/// O(1) via the fixed block stride. Single writer per file; the engine
/// drives handles from one thread.
class BlockFile {
  public:
    static BlockFile create(const std::filesystem::path& path,
                            const BlockFileMeta& meta);
    static BlockFile open(const std::filesystem::path& path);

    BlockFile(BlockFile&&) = default;
    BlockFile& operator=(BlockFile&&) = default;

    /// Emits one untrusted-region block-read event.
    SealedBlock read_block(uint64_t index);

    /// index == block_count() appends; anything past that is an index gap.
    /// Emits one untrusted-region block-write event.
    void write_block(uint64_t index, const SealedBlock& block);

    uint64_t block_count() const { return block_count_; }
    const BlockFileMeta& meta() const { return meta_; }
    const std::filesystem::path& location() const { return path_; }

  private:
    BlockFile() = default;

    uint64_t block_offset(uint64_t index) const;
    void persist_block_count();

    std::filesystem::path path_;
    BlockFileMeta meta_;
    uint64_t block_count_ = 0;
    mutable std::fstream stream_;
};

/// A block file handle paired with the file id its blocks are sealed under.
/// The id is enclave-side knowledge: the untrusted store neither checks nor
/// records it at file granularity.
struct FileBinding {
    BlockFile* file = nullptr;
    uint64_t file_id = 0;
};

}  // namespace sgxmr

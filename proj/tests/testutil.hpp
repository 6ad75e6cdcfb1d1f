#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sgxmr/block_store.hpp"
#include "sgxmr/enclave.hpp"
#include "sgxmr/records.hpp"

namespace sgxmr::test {

class TempDir {
  public:
    TempDir() {
        static std::atomic<uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sgxmr_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path operator/(const std::string& name) const {
        return path_ / name;
    }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline SealKey test_key() {
    return SealKey::from_hex("000102030405060708090a0b0c0d0e0f");
}

/// Writes a little-endian u64 into the first key bytes; the rest stay zero,
/// so lexicographic order of keys equals big-endian order of these values
/// only if you use make_ordered_key below. This one is for identity only.
inline std::vector<uint8_t> u64_key(uint64_t v) {
    std::vector<uint8_t> key(kKeyWidth, 0);
    for (int i = 0; i < 8; ++i) key[i] = static_cast<uint8_t>(v >> (8 * i));
    return key;
}

/// Big-endian u64 key: lexicographic byte order == numeric order.
inline std::vector<uint8_t> ordered_key(uint64_t v) {
    std::vector<uint8_t> key(kKeyWidth, 0);
    for (int i = 0; i < 8; ++i)
        key[7 - i] = static_cast<uint8_t>(v >> (8 * i));
    return key;
}

inline uint64_t ordered_key_value(std::span<const uint8_t> key) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | key[i];
    return v;
}

/// Fills a record with a big-endian numeric key and pseudorandom value.
inline void fill_record(std::span<uint8_t> record, uint64_t key,
                        std::mt19937_64& rng) {
    auto kb = ordered_key(key);
    std::copy(kb.begin(), kb.end(), record.begin());
    for (size_t i = kKeyWidth; i < record.size(); ++i)
        record[i] = static_cast<uint8_t>(rng());
}

/// Creates a sealed block file of `blocks` blocks whose record keys come
/// from `keys` (row-major); missing tail records become dummies.
inline BlockFile make_record_file(const std::filesystem::path& path,
                                  const BlockFileMeta& meta, uint64_t file_id,
                                  const std::vector<uint64_t>& keys,
                                  uint64_t blocks, const SealKey& key,
                                  uint64_t value_seed = 7) {
    BlockFile file = BlockFile::create(path, meta);
    std::mt19937_64 rng(value_seed);
    size_t next = 0;
    for (uint64_t b = 0; b < blocks; ++b) {
        PlainBlock block = PlainBlock::blank(file_id, b, meta);
        for (uint32_t r = 0; r < meta.records_per_block; ++r) {
            if (next < keys.size())
                fill_record(block.slot(r).bytes(), keys[next++], rng);
        }
        file.write_block(b, seal_block(block, key));
    }
    return file;
}

/// Decrypts every record of a file; returns raw record bytes in order.
inline std::vector<std::vector<uint8_t>> read_all_records(
    BlockFile& file, uint64_t file_id, const SealKey& key,
    bool include_dummies = true) {
    std::vector<std::vector<uint8_t>> out;
    for (uint64_t b = 0; b < file.block_count(); ++b) {
        PlainBlock plain =
            unseal_block(file.read_block(b), file_id, b, key, file.meta());
        for (uint32_t r = 0; r < plain.records_per_block; ++r) {
            auto bytes = plain.slot(r).bytes();
            if (!include_dummies && record_is_dummy(bytes)) continue;
            out.emplace_back(bytes.begin(), bytes.end());
        }
    }
    return out;
}

}  // namespace sgxmr::test

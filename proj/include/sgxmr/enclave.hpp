#pragma once

#include <cstdint>
#include <list>
#include <span>
#include <stdexcept>
#include <vector>

#include "sgxmr/block_store.hpp"
#include "sgxmr/crypto.hpp"
#include "sgxmr/records.hpp"

namespace sgxmr {

/// Raised when an untrusted block fails verification. The kind maps to the
/// three tamper classes: modifying a block, shuffling it within a file, and
/// inserting a block from another file.
class IntegrityError : public std::runtime_error {
  public:
    enum class Kind { tag_mismatch, block_id_mismatch, file_id_mismatch };

    IntegrityError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

/// Authenticated encryption of a raw payload. The cleartext header
/// (file_id, block_id) is bound into the tag as associated data; the nonce
/// is fresh per call so sealing the same payload twice never repeats bytes.
SealedBlock seal_payload(uint64_t file_id, uint64_t block_id,
                         std::span<const uint8_t> payload, const SealKey& key);

/// Verifies ids and tag, in that order: a block presented under the wrong
/// file raises file_id_mismatch, the wrong position within the right file
/// raises block_id_mismatch, and any byte modification raises tag_mismatch.
/// Plaintext is returned only when everything verifies.
std::vector<uint8_t> unseal_payload(const SealedBlock& sealed,
                                    uint64_t expected_file_id,
                                    uint64_t expected_block_id,
                                    const SealKey& key);

SealedBlock seal_block(const PlainBlock& plain, const SealKey& key);

PlainBlock unseal_block(const SealedBlock& sealed, uint64_t expected_file_id,
                        uint64_t expected_block_id, const SealKey& key,
                        const BlockFileMeta& meta);

/// Bounded in-enclave cache of decrypted blocks, standing in for the
/// application-managed EPC buffer. Loading past capacity seals the
/// least-recently-used resident block and writes it back to its file before
/// the new block comes in. Resident blocks are treated as mutable, so
/// eviction always writes back.
class EnclaveBuffer {
  public:
    EnclaveBuffer(const SealKey& key, size_t capacity);

    /// Returns a resident reference; valid until the block is evicted,
    /// released, or dropped. Emits one enclave-region block-read event and,
    /// on a miss, one untrusted read (plus an eviction write when full).
    PlainBlock& load(const FileBinding& binding, uint64_t index);

    bool is_resident(const FileBinding& binding, uint64_t index) const;

    /// Seals the resident block under the destination identity, writes it
    /// there, and drops residency. Used by the sorters to move merged blocks
    /// into the output file of a phase.
    void release_to(const FileBinding& src, uint64_t index,
                    const FileBinding& dest, uint64_t dest_index);

    /// Seals a block built in the enclave under the destination identity and
    /// appends it at dest.file->block_count(). Does not enter the cache.
    void append(const FileBinding& dest, const PlainBlock& block);

    /// Discards a resident block without writing it back.
    void drop(const FileBinding& binding, uint64_t index);

    /// Writes back and drops every resident block.
    void flush();

    size_t capacity() const { return capacity_; }
    size_t resident_count() const { return entries_.size(); }
    uint64_t eviction_count() const { return evictions_; }

  private:
    struct Entry {
        BlockFile* file;
        uint64_t file_id;
        uint64_t index;
        PlainBlock block;
        uint64_t last_use;
    };

    std::list<Entry>::iterator find(const BlockFile* file, uint64_t index);
    void write_back(Entry& entry);
    void evict_lru();

    SealKey key_;
    size_t capacity_;
    uint64_t tick_ = 0;
    uint64_t evictions_ = 0;
    std::list<Entry> entries_;
};

}  // namespace sgxmr

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "sgxmr/crypto.hpp"
#include "sgxmr/records.hpp"

namespace sgxmr {

inline constexpr uint64_t kOramFileId = 0x0f0f0f0f0f0f0f0full;

enum class OramOp { read, write };

struct OramConfig {
    uint64_t block_count = 0;    // N logical blocks
    uint32_t bucket_slots = 4;   // Z
    uint32_t payload_size = 0;   // bytes per logical block
    uint32_t stash_capacity = 128;
    uint64_t seed = 1;           // position map / remap randomness
    uint64_t file_id = kOramFileId;
};

/// Desk-scale Path ORAM over sealed in-memory slots. Every access reads one
/// root-to-leaf path — (L+1)*Z sealed slots — extracts the target with
/// o_select over every candidate, remaps the block to a fresh uniform leaf,
/// and greedily writes the path back deepest-bucket-first. The untrusted
/// trace of an access is (L+1)*Z block reads then (L+1)*Z block writes,
/// independent of which logical block was touched or what it holds.
///
/// The position map and stash live entirely on the enclave side (no
/// recursion); blocks never written read back as zeros.
class PathOram {
  public:
    PathOram(const OramConfig& config, const SealKey& key);

    /// Read returns the current payload; write installs data and returns it.
    std::vector<uint8_t> access(OramOp op, uint64_t block_id,
                                std::span<const uint8_t> data = {});

    /// Sequential read of blocks 0..n-1 for cost-shape comparisons.
    void scan(uint64_t n);

    uint64_t height() const { return height_; }            // L
    uint64_t leaf_count() const { return 1ull << height_; }
    uint64_t bucket_count() const { return (2ull << height_) - 1; }
    uint64_t slot_count() const { return bucket_count() * config_.bucket_slots; }

    size_t stash_occupancy() const;
    size_t max_stash_occupancy() const { return max_stash_; }

  private:
    struct StashEntry {
        uint64_t id;    // kEmpty when free
        uint64_t leaf;
        std::vector<uint8_t> payload;
    };

    uint64_t path_node(uint64_t leaf, uint64_t level) const;
    void seal_slot(uint64_t slot_index, uint64_t id,
                   std::span<const uint8_t> payload);
    size_t free_stash_slot();

    OramConfig config_;
    SealKey key_;
    uint64_t height_ = 0;
    std::vector<SealedBlock> slots_;       // untrusted tree storage
    std::vector<uint64_t> position_map_;   // enclave-resident
    std::vector<StashEntry> stash_;        // enclave-resident, fixed capacity
    std::mt19937_64 rng_;
    size_t max_stash_ = 0;
};

}  // namespace sgxmr

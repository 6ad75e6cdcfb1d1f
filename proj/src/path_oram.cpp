#include "sgxmr/path_oram.hpp"

#include <cstring>
#include <stdexcept>

#include "sgxmr/enclave.hpp"
#include "sgxmr/oblivious.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr {

namespace {

constexpr uint64_t kEmpty = ~0ull;

// Scratch block ids for the ORAM's enclave-side record addresses.
constexpr uint64_t kOramTargetScratch = 8;
constexpr uint64_t kOramPathScratchBase = 1u << 20;
constexpr uint64_t kOramStashScratchBase = 1u << 21;

uint64_t load_le64(const uint8_t* p) {
    uint64_t v = 0;
    std::memcpy(&v, p, 8);
    return v;
}

void store_le64(uint8_t* p, uint64_t v) { std::memcpy(p, &v, 8); }

}  // namespace

PathOram::PathOram(const OramConfig& config, const SealKey& key)
    : config_(config), key_(key), rng_(config.seed) {
    if (config_.block_count < 1)
        throw std::invalid_argument("oram needs at least one block");
    if (config_.bucket_slots < 1)
        throw std::invalid_argument("bucket capacity must be at least 1");
    while ((1ull << height_) < config_.block_count) height_++;

    const size_t entry_size = 8 + config_.payload_size;
    std::vector<uint8_t> dummy(entry_size, 0);
    store_le64(dummy.data(), kEmpty);
    slots_.resize(slot_count());
    for (uint64_t s = 0; s < slot_count(); ++s)
        slots_[s] = seal_payload(config_.file_id, s, dummy, key_);

    std::uniform_int_distribution<uint64_t> leaf(0, leaf_count() - 1);
    position_map_.resize(config_.block_count);
    for (auto& p : position_map_) p = leaf(rng_);

    stash_.resize(config_.stash_capacity);
    for (auto& e : stash_) {
        e.id = kEmpty;
        e.leaf = 0;
        e.payload.assign(config_.payload_size, 0);
    }
}

uint64_t PathOram::path_node(uint64_t leaf, uint64_t level) const {
    // Nodes are numbered level by level; the bucket at `level` on the path
    // to `leaf` is indexed by the leaf's level-length prefix.
    return ((1ull << level) - 1) + (leaf >> (height_ - level));
}

void PathOram::seal_slot(uint64_t slot_index, uint64_t id,
                         std::span<const uint8_t> payload) {
    std::vector<uint8_t> entry(8 + config_.payload_size, 0);
    store_le64(entry.data(), id);
    if (!payload.empty())
        std::memcpy(entry.data() + 8, payload.data(), payload.size());
    slots_[slot_index] = seal_payload(config_.file_id, slot_index, entry, key_);
    TraceRecorder::instance().emit(Region::untrusted, Granularity::block,
                                   AccessOp::write, config_.file_id,
                                   slot_index);
}

size_t PathOram::free_stash_slot() {
    for (size_t i = 0; i < stash_.size(); ++i)
        if (stash_[i].id == kEmpty) return i;
    throw std::runtime_error("oram stash overflow");
}

size_t PathOram::stash_occupancy() const {
    size_t n = 0;
    for (const auto& e : stash_) n += (e.id != kEmpty);
    return n;
}

std::vector<uint8_t> PathOram::access(OramOp op, uint64_t block_id,
                                      std::span<const uint8_t> data) {
    if (block_id >= config_.block_count)
        throw std::out_of_range("unknown oram block id");
    if (op == OramOp::write && data.size() != config_.payload_size)
        throw std::invalid_argument("oram payload size mismatch");

    const uint64_t Z = config_.bucket_slots;
    const uint64_t leaf = position_map_[block_id];
    std::uniform_int_distribution<uint64_t> fresh(0, leaf_count() - 1);
    position_map_[block_id] = fresh(rng_);

    // Read the whole path into the enclave.
    const size_t entry_size = 8 + config_.payload_size;
    std::vector<std::vector<uint8_t>> path_entries;
    path_entries.reserve((height_ + 1) * Z);
    for (uint64_t level = 0; level <= height_; ++level) {
        const uint64_t bucket = path_node(leaf, level);
        for (uint64_t z = 0; z < Z; ++z) {
            const uint64_t s = bucket * Z + z;
            TraceRecorder::instance().emit(Region::untrusted,
                                           Granularity::block, AccessOp::read,
                                           config_.file_id, s);
            path_entries.push_back(
                unseal_payload(slots_[s], config_.file_id, s, key_));
        }
    }

    // Extract the target with o_select over every loaded slot and every
    // stash slot; page faults cannot tell which candidate matched.
    std::vector<uint8_t> target(entry_size, 0);
    RecordSlot target_slot{target.data(), static_cast<uint32_t>(entry_size),
                           kScratchFileId, kOramTargetScratch, 0};
    for (size_t i = 0; i < path_entries.size(); ++i) {
        RecordSlot cand{path_entries[i].data(),
                        static_cast<uint32_t>(entry_size), kScratchFileId,
                        kOramPathScratchBase + i, 0};
        const bool match = load_le64(path_entries[i].data()) == block_id;
        o_select(match, cand, target_slot, target_slot);
    }
    std::vector<uint8_t> stash_entry(entry_size, 0);
    for (size_t i = 0; i < stash_.size(); ++i) {
        store_le64(stash_entry.data(), stash_[i].id);
        std::memcpy(stash_entry.data() + 8, stash_[i].payload.data(),
                    config_.payload_size);
        RecordSlot cand{stash_entry.data(), static_cast<uint32_t>(entry_size),
                        kScratchFileId, kOramStashScratchBase + i, 0};
        const bool match = stash_[i].id == block_id;
        o_select(match, cand, target_slot, target_slot);
    }

    // Drop every stale copy of the target, then reinsert it (with the fresh
    // leaf) alongside the other real blocks the path brought in.
    for (auto& entry : path_entries) {
        const uint64_t id = load_le64(entry.data());
        if (id == block_id) store_le64(entry.data(), kEmpty);
    }
    for (auto& entry : stash_)
        if (entry.id == block_id) entry.id = kEmpty;

    std::vector<uint8_t> result(config_.payload_size);
    std::memcpy(result.data(), target.data() + 8, config_.payload_size);

    StashEntry& home = stash_[free_stash_slot()];
    home.id = block_id;
    home.leaf = position_map_[block_id];
    if (op == OramOp::write)
        std::memcpy(home.payload.data(), data.data(), config_.payload_size);
    else
        std::memcpy(home.payload.data(), result.data(), config_.payload_size);

    for (auto& entry : path_entries) {
        const uint64_t id = load_le64(entry.data());
        if (id == kEmpty) continue;
        StashEntry& e = stash_[free_stash_slot()];
        e.id = id;
        e.leaf = position_map_[id];
        std::memcpy(e.payload.data(), entry.data() + 8, config_.payload_size);
    }

    // Greedy write-back: deepest bucket first, each stashed block goes to
    // the deepest path bucket its assigned leaf still agrees with.
    for (uint64_t level = height_ + 1; level-- > 0;) {
        const uint64_t bucket = path_node(leaf, level);
        for (uint64_t z = 0; z < Z; ++z) {
            const uint64_t s = bucket * Z + z;
            bool placed = false;
            for (auto& e : stash_) {
                if (e.id == kEmpty) continue;
                if (path_node(e.leaf, level) != bucket) continue;
                seal_slot(s, e.id, e.payload);
                e.id = kEmpty;
                placed = true;
                break;
            }
            if (!placed) seal_slot(s, kEmpty, {});
        }
    }

    max_stash_ = std::max(max_stash_, stash_occupancy());
    if (op == OramOp::write)
        std::memcpy(result.data(), data.data(), config_.payload_size);
    return result;
}

void PathOram::scan(uint64_t n) {
    if (n > config_.block_count)
        throw std::out_of_range("scan length exceeds block count");
    for (uint64_t i = 0; i < n; ++i) access(OramOp::read, i);
}

}  // namespace sgxmr

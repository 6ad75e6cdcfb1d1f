#include "sgxmr/enclave.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

namespace sgxmr {

namespace {

std::array<uint8_t, 16> header_aad(uint64_t file_id, uint64_t block_id) {
    std::array<uint8_t, 16> aad{};
    for (size_t i = 0; i < 8; ++i) {
        aad[i] = static_cast<uint8_t>(file_id >> (8 * i));
        aad[8 + i] = static_cast<uint8_t>(block_id >> (8 * i));
    }
    return aad;
}

}  // namespace

SealedBlock seal_payload(uint64_t file_id, uint64_t block_id,
                         std::span<const uint8_t> payload, const SealKey& key) {
    SealedBlock sealed;
    sealed.header.file_id = file_id;
    sealed.header.block_id = block_id;
    sealed.header.nonce = next_nonce();
    sealed.ciphertext.resize(payload.size());
    const auto aad = header_aad(file_id, block_id);
    aead_seal(key, sealed.header.nonce, aad, payload, sealed.ciphertext.data(),
              sealed.auth_tag);
    return sealed;
}

std::vector<uint8_t> unseal_payload(const SealedBlock& sealed,
                                    uint64_t expected_file_id,
                                    uint64_t expected_block_id,
                                    const SealKey& key) {
    if (sealed.header.file_id != expected_file_id)
        throw IntegrityError(IntegrityError::Kind::file_id_mismatch,
                             "block belongs to a different file");
    if (sealed.header.block_id != expected_block_id)
        throw IntegrityError(IntegrityError::Kind::block_id_mismatch,
                             "block id does not match requested position");
    std::vector<uint8_t> plain(sealed.ciphertext.size());
    const auto aad = header_aad(sealed.header.file_id, sealed.header.block_id);
    if (!aead_open(key, sealed.header.nonce, aad, sealed.ciphertext,
                   sealed.auth_tag, plain.data()))
        throw IntegrityError(IntegrityError::Kind::tag_mismatch,
                             "authentication tag verification failed");
    return plain;
}

SealedBlock seal_block(const PlainBlock& plain, const SealKey& key) {
    return seal_payload(plain.file_id, plain.block_id, plain.payload, key);
}

PlainBlock unseal_block(const SealedBlock& sealed, uint64_t expected_file_id,
                        uint64_t expected_block_id, const SealKey& key,
                        const BlockFileMeta& meta) {
    PlainBlock plain;
    plain.payload =
        unseal_payload(sealed, expected_file_id, expected_block_id, key);
    if (plain.payload.size() != meta.payload_size)
        throw std::invalid_argument("payload size does not match file meta");
    plain.file_id = expected_file_id;
    plain.block_id = expected_block_id;
    plain.record_size = meta.record_size;
    plain.records_per_block = meta.records_per_block;
    return plain;
}

EnclaveBuffer::EnclaveBuffer(const SealKey& key, size_t capacity)
    : key_(key), capacity_(capacity) {
    if (capacity < 1)
        throw std::invalid_argument("buffer capacity must be at least 1");
}

std::list<EnclaveBuffer::Entry>::iterator EnclaveBuffer::find(
    const BlockFile* file, uint64_t index) {
    return std::find_if(entries_.begin(), entries_.end(),
                        [&](const Entry& e) {
                            return e.file == file && e.index == index;
                        });
}

PlainBlock& EnclaveBuffer::load(const FileBinding& binding, uint64_t index) {
    auto it = find(binding.file, index);
    if (it != entries_.end()) {
        it->last_use = tick_++;
        TraceRecorder::instance().emit(Region::enclave, Granularity::block,
                                       AccessOp::read, binding.file_id, index);
        return it->block;
    }
    if (entries_.size() == capacity_) evict_lru();
    SealedBlock sealed = binding.file->read_block(index);
    PlainBlock plain = unseal_block(sealed, binding.file_id, index, key_,
                                    binding.file->meta());
    entries_.push_back(Entry{binding.file, binding.file_id, index,
                             std::move(plain), tick_++});
    assert(entries_.size() <= capacity_);
    TraceRecorder::instance().emit(Region::enclave, Granularity::block,
                                   AccessOp::read, binding.file_id, index);
    return entries_.back().block;
}

bool EnclaveBuffer::is_resident(const FileBinding& binding,
                                uint64_t index) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) {
        return e.file == binding.file && e.index == index;
    });
}

void EnclaveBuffer::write_back(Entry& entry) {
    TraceRecorder::instance().emit(Region::enclave, Granularity::block,
                                   AccessOp::write, entry.file_id, entry.index);
    entry.file->write_block(entry.index, seal_block(entry.block, key_));
}

void EnclaveBuffer::evict_lru() {
    auto victim = std::min_element(entries_.begin(), entries_.end(),
                                   [](const Entry& a, const Entry& b) {
                                       return a.last_use < b.last_use;
                                   });
    write_back(*victim);
    entries_.erase(victim);
    evictions_++;
}

void EnclaveBuffer::release_to(const FileBinding& src, uint64_t index,
                               const FileBinding& dest, uint64_t dest_index) {
    auto it = find(src.file, index);
    if (it == entries_.end())
        throw std::logic_error("release_to on a non-resident block");
    it->block.file_id = dest.file_id;
    it->block.block_id = dest_index;
    TraceRecorder::instance().emit(Region::enclave, Granularity::block,
                                   AccessOp::write, dest.file_id, dest_index);
    dest.file->write_block(dest_index, seal_block(it->block, key_));
    entries_.erase(it);
}

void EnclaveBuffer::append(const FileBinding& dest, const PlainBlock& block) {
    const uint64_t index = dest.file->block_count();
    TraceRecorder::instance().emit(Region::enclave, Granularity::block,
                                   AccessOp::write, dest.file_id, index);
    SealedBlock sealed = seal_payload(dest.file_id, index, block.payload, key_);
    dest.file->write_block(index, sealed);
}

void EnclaveBuffer::drop(const FileBinding& binding, uint64_t index) {
    auto it = find(binding.file, index);
    if (it != entries_.end()) entries_.erase(it);
}

void EnclaveBuffer::flush() {
    for (Entry& entry : entries_) write_back(entry);
    entries_.clear();
}

}  // namespace sgxmr

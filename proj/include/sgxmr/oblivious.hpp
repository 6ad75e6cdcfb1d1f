#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgxmr/block_store.hpp"
#include "sgxmr/enclave.hpp"
#include "sgxmr/records.hpp"

namespace sgxmr {

struct SortDirection {
    bool ascending = true;
};

/// Record-level compare-exchange flavour. `oblivious` swaps through byte
/// masking and touches both slots in every execution; `plain` is the branchy
/// variant kept as the auditor's positive control and for the
/// no-o-swap benchmark configurations.
enum class SwapMode { plain, oblivious };

struct ObliviousCounters {
    uint64_t compare_exchanges = 0;
    uint64_t record_swaps = 0;
    uint64_t block_pair_ops = 0;

    void reset() { *this = ObliviousCounters{}; }
};

ObliviousCounters& oblivious_counters();

/// n * log2(n) * (log2(n) + 1) / 4, the size of the bitonic network on a
/// power-of-two input.
uint64_t bitonic_compare_exchange_count(uint64_t n);

// Constant-time byte-string helpers; no early exit, no data-dependent
// control flow. Untraced: callers touch the records they read.
bool ct_equal(std::span<const uint8_t> a, std::span<const uint8_t> b);
int ct_compare(std::span<const uint8_t> a, std::span<const uint8_t> b);

/// Key equality with both records read through touch_record.
bool ct_key_equal(const RecordSlot& a, const RecordSlot& b);

/// Key order (dummy sentinel greatest). Reads both records.
int ct_key_compare(const RecordSlot& a, const RecordSlot& b);

/// Dummy check; reads the record.
bool ct_is_dummy(const RecordSlot& slot);

/// Full-record lexicographic order (key bytes then value bytes). The dummy
/// sentinel key is the byte-wise maximum, so dummies sort after every real
/// record with no special casing. Reads both records.
int ct_record_compare(const RecordSlot& a, const RecordSlot& b);

/// out = cond ? a : b, built on an all-ones/all-zeros mask. Both sources are
/// read and the destination written regardless of cond.
void o_select(bool cond, const RecordSlot& a, const RecordSlot& b,
              const RecordSlot& out);

/// Exchanges the two slots iff cond; reads and writes both slots in every
/// execution.
void o_swap(bool cond, const RecordSlot& a, const RecordSlot& b);

/// Branchy swap: reads both slots, writes only when the condition holds.
/// Exists so the auditor has a distinguishable counterexample.
void plain_swap_if(bool cond, const RecordSlot& a, const RecordSlot& b);

/// After the call the pair is ordered per dir (dummies greatest). Realized
/// as a compare followed by a swap conditioned on the order violation.
void o_compare_exchange(SortDirection dir, const RecordSlot& a,
                        const RecordSlot& b,
                        SwapMode mode = SwapMode::oblivious);

/// In-place bitonic sorting network over the slots. The slot count must be a
/// power of two; callers pad with dummy slots. The sequence of
/// compare-exchanges depends only on the slot count.
void bitonic_sort_records(std::span<RecordSlot> slots, SortDirection dir,
                          SwapMode mode = SwapMode::oblivious);

/// Merge half of the network: sorts any bitonic input. Power-of-two size.
void bitonic_merge_records(std::span<RecordSlot> slots, SortDirection dir,
                           SwapMode mode = SwapMode::oblivious);

/// Block-level bitonic sort: `in` must hold a power-of-two number of blocks
/// (the engine pads with all-dummy blocks first). Writes the globally sorted
/// result to `out`, which must be a fresh empty file with the same meta.
/// Every block-pair operation loads both blocks, obliviously reorders their
/// records so the low block holds the smaller half, and writes both back:
/// exactly N*log2(N)*(log2(N)+1)/4 pair operations, each two block reads and
/// two block writes, addressed purely by block_count.
void bitonic_sort_blocks(const FileBinding& in, const FileBinding& out,
                         EnclaveBuffer& buffer,
                         SwapMode mode = SwapMode::oblivious);

namespace detail {
/// Ascending in-enclave sort of one block's records, padding non-power-of-two
/// record counts with scratch dummy slots (dummies are maximal, so the pads
/// sort back out of the block).
void sort_block_records_padded(PlainBlock& block,
                               SwapMode mode = SwapMode::oblivious);
}  // namespace detail

/// Non-oblivious baseline: external 2-way merge sort whose untrusted read
/// order depends on the stored keys. Record selection inside the enclave
/// still goes through o_select, mirroring the CMOV-protected MergeSort
/// baseline; the leak is the block fetch order. Scratch run files are placed
/// next to `out` and sealed under file ids counting up from temp_id_base
/// (default out.file_id + 16).
void merge_sort_blocks(const FileBinding& in, const FileBinding& out,
                       EnclaveBuffer& buffer,
                       SwapMode mode = SwapMode::oblivious,
                       uint64_t temp_id_base = 0);

}  // namespace sgxmr

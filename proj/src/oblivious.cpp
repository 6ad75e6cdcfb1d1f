#include "sgxmr/oblivious.hpp"

#include <bit>
#include <cassert>
#include <cstring>
#include <stdexcept>

namespace sgxmr {

namespace {

// Scratch block ids under kScratchFileId used by the sorters.
constexpr uint64_t kPairWorkScratch = 0;   // block-pair working slots
constexpr uint64_t kSortPadScratch = 1;    // per-block sort padding
constexpr uint64_t kMergeSentinel = 2;     // exhausted-run sentinel

uint64_t next_pow2(uint64_t n) {
    return n <= 1 ? 1 : std::bit_ceil(n);
}

/// Working area backing a span of scratch-addressed record slots.
class SlotArena {
  public:
    SlotArena(uint64_t scratch_block, size_t count, uint32_t record_size)
        : bytes_(count * record_size) {
        slots_.reserve(count);
        for (size_t i = 0; i < count; ++i)
            slots_.push_back(RecordSlot{bytes_.data() + i * record_size,
                                        record_size, kScratchFileId,
                                        scratch_block,
                                        static_cast<uint32_t>(i)});
    }

    std::span<RecordSlot> slots() { return slots_; }
    RecordSlot& slot(size_t i) { return slots_[i]; }

  private:
    std::vector<uint8_t> bytes_;
    std::vector<RecordSlot> slots_;
};

void copy_record(const RecordSlot& dst, const RecordSlot& src) {
    touch_record(src, AccessOp::read);
    std::memcpy(dst.data, src.data, dst.size);
    touch_record(dst, AccessOp::write);
}

void write_dummy_slot(const RecordSlot& slot) {
    write_dummy(slot.bytes());
    touch_record(slot, AccessOp::write);
}

}  // namespace

ObliviousCounters& oblivious_counters() {
    static ObliviousCounters counters;
    return counters;
}

uint64_t bitonic_compare_exchange_count(uint64_t n) {
    if (n < 2) return 0;
    const uint64_t log_n = std::bit_width(n) - 1;
    return n * log_n * (log_n + 1) / 4;
}

bool ct_equal(std::span<const uint8_t> a, std::span<const uint8_t> b) {
    assert(a.size() == b.size());
    uint8_t acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc |= a[i] ^ b[i];
    return acc == 0;
}

int ct_compare(std::span<const uint8_t> a, std::span<const uint8_t> b) {
    assert(a.size() == b.size());
    // Scans from the last byte so the earliest differing byte decides last;
    // every byte is visited on every call.
    int result = 0;
    for (size_t i = a.size(); i-- > 0;) {
        const int av = a[i];
        const int bv = b[i];
        const int ne = (av != bv);
        const int cmp = (av > bv) - (av < bv);
        result = ne * cmp + (1 - ne) * result;
    }
    return result;
}

bool ct_key_equal(const RecordSlot& a, const RecordSlot& b) {
    touch_record(a, AccessOp::read);
    touch_record(b, AccessOp::read);
    return ct_equal(a.key(), b.key());
}

int ct_record_compare(const RecordSlot& a, const RecordSlot& b) {
    touch_record(a, AccessOp::read);
    touch_record(b, AccessOp::read);
    return ct_compare(a.bytes(), b.bytes());
}

int ct_key_compare(const RecordSlot& a, const RecordSlot& b) {
    touch_record(a, AccessOp::read);
    touch_record(b, AccessOp::read);
    return ct_compare(a.key(), b.key());
}

bool ct_is_dummy(const RecordSlot& slot) {
    touch_record(slot, AccessOp::read);
    uint8_t acc = 0xFF;
    for (uint32_t i = 0; i < kKeyWidth; ++i) acc &= slot.data[i];
    return acc == 0xFF;
}

void o_select(bool cond, const RecordSlot& a, const RecordSlot& b,
              const RecordSlot& out) {
    touch_record(a, AccessOp::read);
    touch_record(b, AccessOp::read);
    const uint8_t mask = static_cast<uint8_t>(0 - static_cast<uint8_t>(cond));
    for (uint32_t i = 0; i < out.size; ++i)
        out.data[i] =
            static_cast<uint8_t>((a.data[i] & mask) | (b.data[i] & ~mask));
    touch_record(out, AccessOp::write);
}

void o_swap(bool cond, const RecordSlot& a, const RecordSlot& b) {
    touch_record(a, AccessOp::read);
    touch_record(b, AccessOp::read);
    const uint8_t mask = static_cast<uint8_t>(0 - static_cast<uint8_t>(cond));
    for (uint32_t i = 0; i < a.size; ++i) {
        const uint8_t diff = static_cast<uint8_t>((a.data[i] ^ b.data[i]) & mask);
        a.data[i] ^= diff;
        b.data[i] ^= diff;
    }
    oblivious_counters().record_swaps++;
    touch_record(a, AccessOp::write);
    touch_record(b, AccessOp::write);
}

void plain_swap_if(bool cond, const RecordSlot& a, const RecordSlot& b) {
    touch_record(a, AccessOp::read);
    touch_record(b, AccessOp::read);
    if (cond) {
        for (uint32_t i = 0; i < a.size; ++i) std::swap(a.data[i], b.data[i]);
        touch_record(a, AccessOp::write);
        touch_record(b, AccessOp::write);
    }
}

void o_compare_exchange(SortDirection dir, const RecordSlot& a,
                        const RecordSlot& b, SwapMode mode) {
    const int cmp = ct_record_compare(a, b);
    const bool violates = dir.ascending ? cmp > 0 : cmp < 0;
    oblivious_counters().compare_exchanges++;
    if (mode == SwapMode::oblivious)
        o_swap(violates, a, b);
    else
        plain_swap_if(violates, a, b);
}

void bitonic_merge_records(std::span<RecordSlot> slots, SortDirection dir,
                           SwapMode mode) {
    const size_t n = slots.size();
    if (n <= 1) return;
    if (!std::has_single_bit(n))
        throw std::invalid_argument("bitonic merge needs a power-of-two size");
    for (size_t j = n >> 1; j > 0; j >>= 1)
        for (size_t i = 0; i < n; ++i) {
            const size_t l = i ^ j;
            if (l > i) o_compare_exchange(dir, slots[i], slots[l], mode);
        }
}

void bitonic_sort_records(std::span<RecordSlot> slots, SortDirection dir,
                          SwapMode mode) {
    const size_t n = slots.size();
    if (n <= 1) return;
    if (!std::has_single_bit(n))
        throw std::invalid_argument("bitonic sort needs a power-of-two size");
    for (size_t k = 2; k <= n; k <<= 1)
        for (size_t j = k >> 1; j > 0; j >>= 1)
            for (size_t i = 0; i < n; ++i) {
                const size_t l = i ^ j;
                if (l > i) {
                    const bool up = (i & k) == 0;
                    o_compare_exchange(
                        SortDirection{up == dir.ascending}, slots[i], slots[l],
                        mode);
                }
            }
}

namespace detail {

// Ascending sort of one block's records, padding to a power of two with
// scratch dummy slots. Dummies are maximal, so they land back in the scratch
// tail and the block keeps exactly its records.
void sort_block_records_padded(PlainBlock& block, SwapMode mode) {
    const uint32_t m = block.records_per_block;
    const size_t padded = next_pow2(m);
    SlotArena pad(kSortPadScratch, padded - m, block.record_size);
    std::vector<RecordSlot> slots;
    slots.reserve(padded);
    for (uint32_t i = 0; i < m; ++i) slots.push_back(block.slot(i));
    for (size_t i = 0; i < padded - m; ++i) {
        write_dummy_slot(pad.slot(i));
        slots.push_back(pad.slot(i));
    }
    bitonic_sort_records(slots, SortDirection{true}, mode);
}

}  // namespace detail

namespace {

/// One block-pair operation: loads both blocks, reorders their 2m records in
/// a scratch working area so the low block gets the smaller half (per dir),
/// both halves internally ascending, and writes both blocks to `dst`.
/// `full_sort` handles arbitrary record order (first network stage); the
/// merge path assumes both blocks are internally ascending.
void block_pair_op(const FileBinding& src, const FileBinding& dst,
                   uint64_t low, uint64_t high, bool dir_up, bool full_sort,
                   EnclaveBuffer& buffer, SwapMode mode) {
    const BlockFileMeta& meta = src.file->meta();
    const uint32_t m = meta.records_per_block;
    const size_t padded = next_pow2(2 * static_cast<uint64_t>(m));

    PlainBlock& a = buffer.load(src, low);
    PlainBlock& b = buffer.load(src, high);

    SlotArena work(kPairWorkScratch, padded, meta.record_size);
    if (full_sort) {
        for (uint32_t i = 0; i < m; ++i) copy_record(work.slot(i), a.slot(i));
        for (uint32_t i = 0; i < m; ++i)
            copy_record(work.slot(m + i), b.slot(i));
        for (size_t i = 2 * m; i < padded; ++i) write_dummy_slot(work.slot(i));
        bitonic_sort_records(work.slots(), SortDirection{true}, mode);
    } else {
        // Bitonic arrangement: [a ascending | dummies][dummies | b reversed].
        const size_t half = padded / 2;
        for (uint32_t i = 0; i < m; ++i) copy_record(work.slot(i), a.slot(i));
        for (size_t i = m; i < half; ++i) write_dummy_slot(work.slot(i));
        for (size_t i = half; i < padded - m; ++i)
            write_dummy_slot(work.slot(i));
        for (uint32_t i = 0; i < m; ++i)
            copy_record(work.slot(padded - 1 - i), b.slot(i));
        bitonic_merge_records(work.slots(), SortDirection{true}, mode);
    }

    for (uint32_t i = 0; i < m; ++i) copy_record(a.slot(i), work.slot(i));
    for (uint32_t i = 0; i < m; ++i) copy_record(b.slot(i), work.slot(m + i));
    // A descending pair exchanges whole blocks; executed unconditionally so
    // the record trace is uniform across network positions.
    for (uint32_t i = 0; i < m; ++i) o_swap(!dir_up, a.slot(i), b.slot(i));

    buffer.release_to(src, low, dst, low);
    buffer.release_to(src, high, dst, high);
    oblivious_counters().block_pair_ops++;
}

}  // namespace

void bitonic_sort_blocks(const FileBinding& in, const FileBinding& out,
                         EnclaveBuffer& buffer, SwapMode mode) {
    const uint64_t n = in.file->block_count();
    if (out.file->block_count() != 0)
        throw std::invalid_argument("output file must be empty");
    if (out.file->meta() != in.file->meta())
        throw std::invalid_argument("output meta must match input");
    if (n == 0) return;
    if (n == 1) {
        buffer.load(in, 0);
        buffer.release_to(in, 0, out, 0);
        return;
    }
    if (!std::has_single_bit(n))
        throw std::invalid_argument(
            "block count must be a power of two (pad with dummy blocks)");

    for (uint64_t k = 2; k <= n; k <<= 1) {
        for (uint64_t j = k >> 1; j > 0; j >>= 1) {
            for (uint64_t i = 0; i < n; ++i) {
                const uint64_t l = i ^ j;
                if (l <= i) continue;
                const bool up = (i & k) == 0;
                // The first stage touches every block exactly once, so it
                // reads from `in` and establishes internal order; all later
                // stages run in place on `out`.
                const bool first_stage = (k == 2);
                const FileBinding& src = first_stage ? in : out;
                block_pair_op(src, out, i, l, up, first_stage, buffer, mode);
            }
        }
    }
}

void merge_sort_blocks(const FileBinding& in, const FileBinding& out,
                       EnclaveBuffer& buffer, SwapMode mode,
                       uint64_t temp_id_base) {
    const uint64_t n = in.file->block_count();
    if (out.file->block_count() != 0)
        throw std::invalid_argument("output file must be empty");
    if (out.file->meta() != in.file->meta())
        throw std::invalid_argument("output meta must match input");
    if (n == 0) return;
    const BlockFileMeta& meta = in.file->meta();
    const uint32_t rpb = meta.records_per_block;
    if (temp_id_base == 0) temp_id_base = out.file_id + 16;

    uint64_t passes = 0;
    while ((1ull << passes) < n) passes++;

    // Ping-pong scratch run files; the final pass lands in `out`.
    std::vector<BlockFile> temps;
    auto temp_path = [&](int idx) {
        auto p = out.file->location();
        p += (idx == 0 ? ".run0" : ".run1");
        return p;
    };
    BlockFile temp0 = BlockFile::create(temp_path(0), meta);
    BlockFile temp1 = BlockFile::create(temp_path(1), meta);
    FileBinding ping{&temp0, temp_id_base};
    FileBinding pong{&temp1, temp_id_base + 1};

    // Pass 0: sort each block in the enclave, writing initial runs.
    FileBinding cur = (passes == 0) ? out : ping;
    for (uint64_t i = 0; i < n; ++i) {
        PlainBlock& block = buffer.load(in, i);
        detail::sort_block_records_padded(block, mode);
        buffer.release_to(in, i, cur, i);
    }

    ScratchRecord sentinel_store(kMergeSentinel, meta.record_size);
    RecordSlot sentinel = sentinel_store.slot();
    write_dummy(sentinel.bytes());

    for (uint64_t pass = 1; pass <= passes; ++pass) {
        const uint64_t width = 1ull << (pass - 1);
        FileBinding dst = (pass == passes) ? out
                          : (cur.file == ping.file ? pong : ping);
        uint64_t out_index = 0;
        for (uint64_t start = 0; start < n; start += 2 * width) {
            const uint64_t a_end = std::min(start + width, n);
            const uint64_t b_end = std::min(start + 2 * width, n);
            uint64_t a_blk = start, b_blk = a_end;
            uint32_t a_rec = 0, b_rec = 0;
            PlainBlock* a_cur = a_blk < a_end ? &buffer.load(cur, a_blk) : nullptr;
            PlainBlock* b_cur = b_blk < b_end ? &buffer.load(cur, b_blk) : nullptr;
            PlainBlock staging = PlainBlock::blank(dst.file_id, out_index, meta);
            uint32_t staged = 0;
            const uint64_t total =
                (b_end - start) * static_cast<uint64_t>(rpb);
            for (uint64_t t = 0; t < total; ++t) {
                RecordSlot a_slot = a_cur ? a_cur->slot(a_rec) : sentinel;
                RecordSlot b_slot = b_cur ? b_cur->slot(b_rec) : sentinel;
                const int cmp = ct_record_compare(a_slot, b_slot);
                const bool take_a = a_cur && (cmp <= 0 || !b_cur);
                o_select(take_a, a_slot, b_slot, staging.slot(staged));
                if (take_a) {
                    if (++a_rec == rpb) {
                        buffer.drop(cur, a_blk);
                        a_rec = 0;
                        a_blk++;
                        a_cur = a_blk < a_end ? &buffer.load(cur, a_blk) : nullptr;
                    }
                } else {
                    if (++b_rec == rpb) {
                        buffer.drop(cur, b_blk);
                        b_rec = 0;
                        b_blk++;
                        b_cur = b_blk < b_end ? &buffer.load(cur, b_blk) : nullptr;
                    }
                }
                if (++staged == rpb) {
                    buffer.append(dst, staging);
                    out_index++;
                    staging = PlainBlock::blank(dst.file_id, out_index, meta);
                    staged = 0;
                }
            }
        }
        cur = dst;
    }

    std::error_code ec;
    std::filesystem::remove(temp_path(0), ec);
    std::filesystem::remove(temp_path(1), ec);
}

}  // namespace sgxmr

#include "sgxmr/mapreduce.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sgxmr {

namespace {

// Scratch block ids (under kScratchFileId) for the engine's registers.
constexpr uint64_t kCombineScratch = 3;
constexpr uint64_t kReduceAccumulator = 4;
constexpr uint64_t kReduceCombined = 5;
constexpr uint64_t kReduceDummy = 6;
constexpr uint64_t kReduceSentinel = 7;

uint64_t load_le64(const uint8_t* p) {
    uint64_t v = 0;
    std::memcpy(&v, p, 8);
    return v;
}

void store_le64(uint8_t* p, uint64_t v) { std::memcpy(p, &v, 8); }

void lanes_add(std::span<const uint8_t> a, std::span<const uint8_t> b,
               std::span<uint8_t> out) {
    const size_t lanes = out.size() / 8;
    for (size_t i = 0; i < lanes; ++i)
        store_le64(out.data() + 8 * i,
                   load_le64(a.data() + 8 * i) + load_le64(b.data() + 8 * i));
    for (size_t i = lanes * 8; i < out.size(); ++i)
        out[i] = a[i] | b[i];  // tail bytes are zero by convention
}

void masked_select(bool take_a, std::span<const uint8_t> a,
                   std::span<const uint8_t> b, std::span<uint8_t> out) {
    const uint8_t mask = static_cast<uint8_t>(0 - static_cast<uint8_t>(take_a));
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<uint8_t>((a[i] & mask) | (b[i] & ~mask));
}

void top_k_merge(uint32_t k, std::span<const uint8_t> a,
                 std::span<const uint8_t> b, std::span<uint8_t> out) {
    const size_t padded = std::bit_ceil(2 * static_cast<size_t>(k));
    std::vector<uint64_t> lanes(padded, 0);
    for (uint32_t i = 0; i < k; ++i) {
        lanes[i] = load_le64(a.data() + 8 * i);
        lanes[k + i] = load_le64(b.data() + 8 * i);
    }
    // Scalar bitonic network, branchless compare-swap, descending.
    for (size_t span_k = 2; span_k <= padded; span_k <<= 1)
        for (size_t j = span_k >> 1; j > 0; j >>= 1)
            for (size_t i = 0; i < padded; ++i) {
                const size_t l = i ^ j;
                if (l <= i) continue;
                const bool descending = (i & span_k) == 0;
                const bool violates =
                    descending ? lanes[i] < lanes[l] : lanes[i] > lanes[l];
                const uint64_t mask = 0 - static_cast<uint64_t>(violates);
                const uint64_t diff = (lanes[i] ^ lanes[l]) & mask;
                lanes[i] ^= diff;
                lanes[l] ^= diff;
            }
    std::fill(out.begin(), out.end(), 0);
    for (uint32_t i = 0; i < k; ++i) store_le64(out.data() + 8 * i, lanes[i]);
}

/// out = combine(a, b) with out.key = b.key. Reads both records, writes out.
void combine_records(const Aggregator& agg, const RecordSlot& a,
                     const RecordSlot& b, const RecordSlot& out) {
    touch_record(a, AccessOp::read);
    touch_record(b, AccessOp::read);
    std::vector<uint8_t> value(out.size - kKeyWidth);
    combine_values(agg, a.value(), b.value(), value);
    std::memcpy(out.data, b.data, kKeyWidth);
    std::memcpy(out.data + kKeyWidth, value.data(), value.size());
    touch_record(out, AccessOp::write);
}

/// Linear oblivious combiner pass over a sorted block: equal-key neighbours
/// merge rightward, the left slot of each merged pair becomes a dummy. Every
/// slot pair gets the identical access sequence regardless of keys.
void combine_sorted_block(const Aggregator& agg, PlainBlock& block,
                          ScratchRecord& combined, ScratchRecord& dummy) {
    for (uint32_t i = 0; i + 1 < block.records_per_block; ++i) {
        RecordSlot left = block.slot(i);
        RecordSlot right = block.slot(i + 1);
        const bool same = ct_key_equal(left, right);
        combine_records(agg, left, right, combined.slot());
        o_select(same, combined.slot(), right, right);
        o_select(same, dummy.slot(), left, left);
    }
}

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

std::filesystem::path with_suffix(const std::filesystem::path& p,
                                  const char* suffix) {
    std::filesystem::path out = p;
    out += suffix;
    return out;
}

}  // namespace

void JobConfig::validate() const {
    meta().validate();  // throws on bad geometry
    if (buffer_capacity < 3)
        throw std::invalid_argument("buffer_capacity must be at least 3");
    if (value_size() < 8)
        throw std::invalid_argument(
            "value field must hold at least one 64-bit lane");
    if (aggregator.kind == AggregatorKind::top_k) {
        if (aggregator.k < 1)
            throw std::invalid_argument("top_k needs k >= 1");
        if (aggregator.k * 8 > value_size())
            throw std::invalid_argument("top_k slots exceed the value field");
    }
}

JobConfig parse_job_config(std::istream& in) {
    JobConfig cfg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::invalid_argument("config line " +
                                            std::to_string(lineno) +
                                            ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{}
                                          : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "block_size") {
            cfg.block_size = static_cast<uint32_t>(std::stoul(value));
        } else if (key == "record_size") {
            cfg.record_size = static_cast<uint32_t>(std::stoul(value));
        } else if (key == "buffer_capacity") {
            cfg.buffer_capacity = static_cast<uint32_t>(std::stoul(value));
        } else if (key == "aggregator") {
            if (value == "count") cfg.aggregator = {AggregatorKind::count, 1};
            else if (value == "sum") cfg.aggregator = {AggregatorKind::sum, 1};
            else if (value == "max") cfg.aggregator = {AggregatorKind::max, 1};
            else if (value == "min") cfg.aggregator = {AggregatorKind::min, 1};
            else if (value.rfind("topk:", 0) == 0)
                cfg.aggregator = {AggregatorKind::top_k,
                                  static_cast<uint32_t>(std::stoul(value.substr(5)))};
            else
                throw std::invalid_argument("unknown aggregator: " + value);
        } else if (key == "padding") {
            if (value == "none") cfg.padding = PaddingMode::none;
            else if (value == "pad_only") cfg.padding = PaddingMode::pad_only;
            else if (value == "pad_then_postprocess")
                cfg.padding = PaddingMode::pad_then_postprocess;
            else
                throw std::invalid_argument("unknown padding mode: " + value);
        } else if (key == "sort") {
            if (value == "bitonic") cfg.sort = SortKind::bitonic;
            else if (value == "merge") cfg.sort = SortKind::merge;
            else
                throw std::invalid_argument("unknown sort kind: " + value);
        } else if (key == "key_hex") {
            cfg.key = SealKey::from_hex(value);
        } else {
            throw std::invalid_argument("unknown config key: " + key);
        }
    }
    cfg.validate();
    return cfg;
}

JobConfig load_job_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    return parse_job_config(in);
}

void combine_values(const Aggregator& agg, std::span<const uint8_t> a,
                    std::span<const uint8_t> b, std::span<uint8_t> out) {
    switch (agg.kind) {
        case AggregatorKind::count:
        case AggregatorKind::sum:
            lanes_add(a, b, out);
            break;
        case AggregatorKind::max:
            masked_select(ct_compare(a, b) >= 0, a, b, out);
            break;
        case AggregatorKind::min:
            masked_select(ct_compare(a, b) <= 0, a, b, out);
            break;
        case AggregatorKind::top_k:
            top_k_merge(agg.k, a, b, out);
            break;
    }
}

uint64_t map_phase(const JobConfig& cfg, const MapFunction& map_fn,
                   const FileBinding& in, const FileBinding& out,
                   EnclaveBuffer& buffer) {
    const BlockFileMeta meta = cfg.meta();
    if (in.file->meta() != meta)
        throw std::invalid_argument("input file geometry does not match job");
    const uint32_t rpb = meta.records_per_block;

    ScratchRecord combined(kCombineScratch, meta.record_size);
    ScratchRecord dummy(kReduceDummy, meta.record_size);
    write_dummy(dummy.slot().bytes());

    uint64_t out_index = 0;
    PlainBlock staging = PlainBlock::blank(out.file_id, 0, meta);
    uint32_t filled = 0;
    uint64_t emitted = 0;

    auto flush = [&] {
        detail::sort_block_records_padded(staging);
        if (cfg.combiner_enabled) {
            combine_sorted_block(cfg.aggregator, staging, combined, dummy);
            detail::sort_block_records_padded(staging);
        }
        buffer.append(out, staging);
        out_index++;
        staging = PlainBlock::blank(out.file_id, out_index, meta);
        filled = 0;
    };

    RecordEmitter emitter([&](std::span<const uint8_t> key,
                              std::span<const uint8_t> value) {
        if (key.size() > kKeyWidth)
            throw std::invalid_argument("map output key exceeds key width");
        if (value.size() > cfg.value_size())
            throw std::invalid_argument("map output value exceeds record size");
        RecordSlot slot = staging.slot(filled);
        std::memset(slot.data, 0, slot.size);
        std::memcpy(slot.data, key.data(), key.size());
        std::memcpy(slot.data + kKeyWidth, value.data(), value.size());
        if (record_is_dummy(slot.bytes()))
            throw std::invalid_argument("map output key is the dummy sentinel");
        touch_record(slot, AccessOp::write);
        emitted++;
        if (++filled == rpb) flush();
    });

    for (uint64_t b = 0; b < in.file->block_count(); ++b) {
        PlainBlock& block = buffer.load(in, b);
        for (uint32_t r = 0; r < rpb; ++r) {
            RecordSlot slot = block.slot(r);
            touch_record(slot, AccessOp::read);
            if (record_is_dummy(slot.bytes())) continue;
            map_fn(slot, emitter);
        }
        buffer.drop(in, b);
    }
    if (filled > 0) {
        for (uint32_t r = filled; r < rpb; ++r) {
            RecordSlot slot = staging.slot(r);
            write_dummy(slot.bytes());
            touch_record(slot, AccessOp::write);
        }
        flush();
    }
    return emitted;
}

void pad_to_power_of_two(const FileBinding& file, EnclaveBuffer& buffer) {
    const uint64_t n = file.file->block_count();
    if (n <= 1) return;
    const uint64_t target = std::bit_ceil(n);
    for (uint64_t b = n; b < target; ++b)
        buffer.append(file,
                      PlainBlock::blank(file.file_id, b, file.file->meta()));
}

void sort_phase(const JobConfig& cfg, const FileBinding& in,
                const FileBinding& out, EnclaveBuffer& buffer) {
    if (cfg.sort == SortKind::bitonic) {
        pad_to_power_of_two(in, buffer);
        bitonic_sort_blocks(in, out, buffer);
    } else {
        merge_sort_blocks(in, out, buffer);
    }
}

uint64_t reduce_phase(const JobConfig& cfg, const FileBinding& sorted,
                      const FileBinding& out, EnclaveBuffer& buffer) {
    const BlockFileMeta meta = sorted.file->meta();
    const uint32_t rpb = meta.records_per_block;
    const uint64_t blocks = sorted.file->block_count();
    const bool padded = cfg.padding != PaddingMode::none;

    ScratchRecord acc(kReduceAccumulator, meta.record_size);
    ScratchRecord combined(kReduceCombined, meta.record_size);
    ScratchRecord dummy(kReduceDummy, meta.record_size);
    ScratchRecord sentinel(kReduceSentinel, meta.record_size);
    write_dummy(acc.slot().bytes());
    write_dummy(dummy.slot().bytes());
    write_dummy(sentinel.slot().bytes());

    uint64_t distinct = 0;
    uint64_t out_index = 0;
    PlainBlock staging = PlainBlock::blank(out.file_id, 0, meta);
    uint32_t staged = 0;

    auto append_staging = [&] {
        buffer.append(out, staging);
        out_index++;
        staging = PlainBlock::blank(out.file_id, out_index, meta);
        staged = 0;
    };

    for (uint64_t b = 0; b < blocks; ++b) {
        PlainBlock& cur = buffer.load(sorted, b);
        PlainBlock* next_block =
            b + 1 < blocks ? &buffer.load(sorted, b + 1) : nullptr;
        for (uint32_t r = 0; r < rpb; ++r) {
            RecordSlot rec = cur.slot(r);
            RecordSlot next = r + 1 < rpb
                                  ? cur.slot(r + 1)
                                  : (next_block ? next_block->slot(0)
                                                : sentinel.slot());
            // Accumulate: continue the group or restart from this record.
            const bool continues = ct_key_equal(acc.slot(), rec);
            combine_records(cfg.aggregator, acc.slot(), rec, combined.slot());
            o_select(continues, combined.slot(), rec, acc.slot());
            // Boundary lookahead; a key decrease means unsorted input.
            const int next_cmp = ct_key_compare(rec, next);
            if (next_cmp > 0)
                throw std::invalid_argument("reduce input not sorted by key");
            const bool boundary = next_cmp != 0;
            const bool is_real = !ct_is_dummy(rec);
            const bool emit_real = boundary && is_real;
            distinct += static_cast<uint64_t>(emit_real);
            if (padded) {
                o_select(emit_real, acc.slot(), dummy.slot(),
                         staging.slot(staged));
                if (++staged == rpb) append_staging();
            } else if (emit_real) {
                o_select(true, acc.slot(), dummy.slot(), staging.slot(staged));
                if (++staged == rpb) append_staging();
            }
        }
        buffer.drop(sorted, b);
    }
    if (!padded && staged > 0) {
        for (uint32_t r = staged; r < rpb; ++r) {
            RecordSlot slot = staging.slot(r);
            write_dummy(slot.bytes());
            touch_record(slot, AccessOp::write);
        }
        append_staging();
    }
    return distinct;
}

void post_process(const JobConfig& cfg, const FileBinding& padded, uint64_t k,
                  const FileBinding& out, EnclaveBuffer& buffer) {
    const BlockFileMeta meta = padded.file->meta();
    pad_to_power_of_two(padded, buffer);
    BlockFile sorted = BlockFile::create(
        with_suffix(out.file->location(), ".postsort"), meta);
    FileBinding sorted_binding{&sorted, out.file_id + 16};
    bitonic_sort_blocks(padded, sorted_binding, buffer);
    const uint64_t keep = ceil_div(k, meta.records_per_block);
    for (uint64_t b = 0; b < keep; ++b) {
        buffer.load(sorted_binding, b);
        buffer.release_to(sorted_binding, b, out, b);
    }
    (void)cfg;
}

JobResult run_job(const JobConfig& cfg, const MapFunction& map_fn,
                  const std::filesystem::path& input, uint64_t input_file_id,
                  const std::filesystem::path& output) {
    cfg.validate();
    BlockFile in = BlockFile::open(input);
    EnclaveBuffer buffer(cfg.key, cfg.buffer_capacity);
    const BlockFileMeta meta = cfg.meta();

    BlockFile map_out = BlockFile::create(with_suffix(output, ".map"), meta);
    BlockFile sorted = BlockFile::create(with_suffix(output, ".sorted"), meta);

    FileBinding in_binding{&in, input_file_id};
    FileBinding map_binding{&map_out, input_file_id + 1};
    FileBinding sorted_binding{&sorted, input_file_id + 2};

    trace_phase("map");
    map_phase(cfg, map_fn, in_binding, map_binding, buffer);

    trace_phase("sort");
    sort_phase(cfg, map_binding, sorted_binding, buffer);

    JobResult result;
    result.map_output_blocks = map_out.block_count();
    result.reduce_input_blocks = sorted.block_count();

    if (cfg.padding == PaddingMode::pad_then_postprocess) {
        BlockFile padded =
            BlockFile::create(with_suffix(output, ".padded"), meta);
        FileBinding padded_binding{&padded, input_file_id + 3};
        trace_phase("reduce");
        result.distinct_keys =
            reduce_phase(cfg, sorted_binding, padded_binding, buffer);
        result.padded_output_blocks = padded.block_count();
        BlockFile final_out = BlockFile::create(output, meta);
        FileBinding final_binding{&final_out, input_file_id + 4};
        trace_phase("post_process");
        post_process(cfg, padded_binding, result.distinct_keys, final_binding,
                     buffer);
        result.output = output;
        result.output_file_id = final_binding.file_id;
        result.output_blocks = final_out.block_count();
    } else {
        BlockFile final_out = BlockFile::create(output, meta);
        FileBinding final_binding{&final_out, input_file_id + 3};
        trace_phase("reduce");
        result.distinct_keys =
            reduce_phase(cfg, sorted_binding, final_binding, buffer);
        if (cfg.padding == PaddingMode::pad_only)
            result.padded_output_blocks = final_out.block_count();
        result.output = output;
        result.output_file_id = final_binding.file_id;
        result.output_blocks = final_out.block_count();
    }
    return result;
}

}  // namespace sgxmr

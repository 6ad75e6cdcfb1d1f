#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>

#include "sgxmr/oblivious.hpp"

namespace sgxmr {

/// Hierarchically aggregatable reduce functions: the combiner applies the
/// same operation to partial aggregates, so local results merge into global
/// ones. count and sum add 64-bit value lanes; max/min order the value bytes
/// as one big-endian unsigned integer; top_k keeps the k largest 64-bit
/// lanes, descending.
enum class AggregatorKind { count, sum, max, min, top_k };

struct Aggregator {
    AggregatorKind kind = AggregatorKind::count;
    uint32_t k = 1;  // slot count for top_k
};

enum class PaddingMode { none, pad_only, pad_then_postprocess };
enum class SortKind { bitonic, merge };

struct JobConfig {
    uint32_t block_size = 1024;  // payload bytes per block
    uint32_t record_size = 64;
    Aggregator aggregator{};
    PaddingMode padding = PaddingMode::pad_then_postprocess;
    uint32_t buffer_capacity = 4;  // blocks; >= 3
    SortKind sort = SortKind::bitonic;  // merge exists for leakage demos
    SealKey key{};
    bool combiner_enabled = true;  // test hook; combiners are mandatory

    BlockFileMeta meta() const {
        return BlockFileMeta::for_block_size(block_size, record_size);
    }
    uint32_t value_size() const { return record_size - kKeyWidth; }
    void validate() const;
};

/// Key-value text format, one `key = value` per line, '#' comments.
/// Keys: block_size, record_size, aggregator, padding, buffer_capacity,
/// sort, key_hex.
JobConfig parse_job_config(std::istream& in);
JobConfig load_job_config(const std::filesystem::path& path);

/// Combines two aggregate values into out (out may alias a or b); branchless
/// for every kind.
void combine_values(const Aggregator& agg, std::span<const uint8_t> a,
                    std::span<const uint8_t> b, std::span<uint8_t> out);

/// Collects the key-value records a map function emits. Keys shorter than
/// the key width and values shorter than the value width are zero-padded;
/// oversized ones are an overflow error, as is the reserved dummy key.
class RecordEmitter {
  public:
    using Sink = std::function<void(std::span<const uint8_t> key,
                                    std::span<const uint8_t> value)>;

    explicit RecordEmitter(Sink sink) : sink_(std::move(sink)) {}

    void emit(std::span<const uint8_t> key, std::span<const uint8_t> value) {
        sink_(key, value);
    }
    void emit(std::string_view key, std::span<const uint8_t> value) {
        sink_({reinterpret_cast<const uint8_t*>(key.data()), key.size()},
              value);
    }

  private:
    Sink sink_;
};

/// User map function: input record -> zero or more key-value emissions. The
/// engine reads the input record on its behalf; the function must not touch
/// other records.
using MapFunction =
    std::function<void(const RecordSlot& input, RecordEmitter& emit)>;

struct JobResult {
    std::filesystem::path output;
    uint64_t output_file_id = 0;
    uint64_t distinct_keys = 0;
    uint64_t map_output_blocks = 0;
    uint64_t reduce_input_blocks = 0;
    uint64_t padded_output_blocks = 0;
    uint64_t output_blocks = 0;
};

// Individual phases. File bindings pair handles with the file ids blocks are
// sealed under; each phase output uses a fresh id so cross-phase replay is
// caught by the id checks.

/// Reads the input strictly sequentially; each filled map-output block is
/// bitonic-sorted in the enclave, combined (equal-key neighbours merged, the
/// freed slots dummied), compacted by a second sort, and appended. Returns
/// the number of records the map function emitted.
uint64_t map_phase(const JobConfig& cfg, const MapFunction& map_fn,
                   const FileBinding& in, const FileBinding& out,
                   EnclaveBuffer& buffer);

/// Appends all-dummy blocks until the block count is a power of two.
void pad_to_power_of_two(const FileBinding& file, EnclaveBuffer& buffer);

/// Pads (bitonic only) and sorts the intermediate file into out.
void sort_phase(const JobConfig& cfg, const FileBinding& in,
                const FileBinding& out, EnclaveBuffer& buffer);

/// Sequential scan over the sorted file. In the padded modes every input
/// record produces exactly one output record — the group aggregate at group
/// boundaries, a dummy otherwise, chosen via o_select — so one output block
/// is written per input block. With PaddingMode::none only the aggregates
/// are written (the leaky baseline). Returns the number of distinct real
/// keys; throws std::invalid_argument when a key decrease shows the input
/// unsorted.
uint64_t reduce_phase(const JobConfig& cfg, const FileBinding& sorted,
                      const FileBinding& out, EnclaveBuffer& buffer);

/// Bitonic-sorts the padded file so the k real aggregates lead, then copies
/// ceil(k / records_per_block) blocks into out. Output size reveals the
/// distinct-key count and nothing else.
void post_process(const JobConfig& cfg, const FileBinding& padded, uint64_t k,
                  const FileBinding& out, EnclaveBuffer& buffer);

/// The whole regulated dataflow: map -> (pad) -> sort -> reduce
/// [-> post-process]. Intermediate files are placed next to the output and
/// retained for audit; file ids count up from input_file_id.
JobResult run_job(const JobConfig& cfg, const MapFunction& map_fn,
                  const std::filesystem::path& input, uint64_t input_file_id,
                  const std::filesystem::path& output);

}  // namespace sgxmr

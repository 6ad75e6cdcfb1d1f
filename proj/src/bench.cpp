#include "sgxmr/bench.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <ostream>
#include <random>
#include <stdexcept>

#include "sgxmr/apps.hpp"
#include "sgxmr/mapreduce.hpp"
#include "sgxmr/path_oram.hpp"

namespace sgxmr {

namespace {

constexpr uint64_t kBenchKmeansClusters = 8;

SealKey bench_key() {
    return SealKey::from_hex("101112131415161718191a1b1c1d1e1f");
}

class WallTimer {
  public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

std::filesystem::path workdir_for(const BenchOptions& opt) {
    if (!opt.workdir.empty()) {
        std::filesystem::create_directories(opt.workdir);
        return opt.workdir;
    }
    auto dir = std::filesystem::temp_directory_path() /
               ("sgxmr_bench_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

BenchRow finish_row(const std::string& name, uint64_t blocks,
                    uint32_t block_size, const TraceStats& stats,
                    double wall_ms) {
    BenchRow row;
    row.scenario = name;
    row.blocks = blocks;
    row.block_size = block_size;
    row.untrusted_reads = stats.untrusted_block_reads();
    row.untrusted_writes = stats.untrusted_block_writes();
    row.enclave_record_touches = stats.enclave_record_touches();
    row.wall_ms = wall_ms;
    return row;
}

BlockFile make_random_file(const std::filesystem::path& path,
                           const BlockFileMeta& meta, uint64_t file_id,
                           uint64_t blocks, uint64_t seed) {
    BlockFile file = BlockFile::create(path, meta);
    std::mt19937_64 rng(seed);
    for (uint64_t b = 0; b < blocks; ++b) {
        PlainBlock block = PlainBlock::blank(file_id, b, meta);
        for (uint32_t r = 0; r < meta.records_per_block; ++r) {
            auto slot = block.slot(r).bytes();
            for (uint32_t i = 0; i < kKeyWidth; ++i)
                slot[i] = static_cast<uint8_t>(rng());
            slot[0] = 0;  // keep real keys clear of the dummy sentinel
        }
        file.write_block(b, seal_block(block, bench_key()));
    }
    return file;
}

// ---- ORAM-backed baseline pipeline ----------------------------------------

/// A contiguous range of logical ORAM ids treated as a block array.
struct OramRange {
    PathOram* oram;
    uint64_t base;
    BlockFileMeta meta;

    PlainBlock read(uint64_t i) const {
        PlainBlock block;
        block.file_id = base;
        block.block_id = i;
        block.record_size = meta.record_size;
        block.records_per_block = meta.records_per_block;
        block.payload = oram->access(OramOp::read, base + i);
        return block;
    }
    void write(uint64_t i, const PlainBlock& block) const {
        oram->access(OramOp::write, base + i, block.payload);
    }
};

/// External 2-way merge sort whose every block I/O is an ORAM access.
/// Returns the range holding the sorted result.
OramRange oram_merge_sort(OramRange a, OramRange b, uint64_t n) {
    for (uint64_t i = 0; i < n; ++i) {
        PlainBlock block = a.read(i);
        detail::sort_block_records_padded(block);
        a.write(i, block);
    }
    uint64_t passes = 0;
    while ((1ull << passes) < n) passes++;
    const uint32_t rpb = a.meta.records_per_block;
    ScratchRecord sentinel_store(40, a.meta.record_size);
    RecordSlot sentinel = sentinel_store.slot();
    write_dummy(sentinel.bytes());

    OramRange cur = a, dst = b;
    for (uint64_t pass = 1; pass <= passes; ++pass) {
        const uint64_t width = 1ull << (pass - 1);
        uint64_t out_index = 0;
        for (uint64_t start = 0; start < n; start += 2 * width) {
            const uint64_t a_end = std::min(start + width, n);
            const uint64_t b_end = std::min(start + 2 * width, n);
            uint64_t a_blk = start, b_blk = a_end;
            uint32_t a_rec = 0, b_rec = 0;
            PlainBlock a_cur, b_cur;
            bool a_live = a_blk < a_end, b_live = b_blk < b_end;
            if (a_live) a_cur = cur.read(a_blk);
            if (b_live) b_cur = cur.read(b_blk);
            PlainBlock staging =
                PlainBlock::blank(dst.base, out_index, a.meta);
            uint32_t staged = 0;
            const uint64_t total = (b_end - start) * static_cast<uint64_t>(rpb);
            for (uint64_t t = 0; t < total; ++t) {
                RecordSlot a_slot = a_live ? a_cur.slot(a_rec) : sentinel;
                RecordSlot b_slot = b_live ? b_cur.slot(b_rec) : sentinel;
                const int cmp = ct_record_compare(a_slot, b_slot);
                const bool take_a = a_live && (cmp <= 0 || !b_live);
                o_select(take_a, a_slot, b_slot, staging.slot(staged));
                if (take_a) {
                    if (++a_rec == rpb) {
                        a_rec = 0;
                        a_blk++;
                        a_live = a_blk < a_end;
                        if (a_live) a_cur = cur.read(a_blk);
                    }
                } else {
                    if (++b_rec == rpb) {
                        b_rec = 0;
                        b_blk++;
                        b_live = b_blk < b_end;
                        if (b_live) b_cur = cur.read(b_blk);
                    }
                }
                if (++staged == rpb) {
                    dst.write(out_index, staging);
                    out_index++;
                    staging = PlainBlock::blank(dst.base, out_index, a.meta);
                    staged = 0;
                }
            }
        }
        std::swap(cur, dst);
    }
    return cur;
}

/// Scan the sorted range and write one aggregate per group, compacted, into
/// `out`. Group boundaries are handled with o_select like the engine's
/// reducer; only the block fetch schedule differs from SGX-MR.
uint64_t oram_aggregate_scan(const OramRange& sorted, uint64_t n,
                             const OramRange& out, const Aggregator& agg) {
    const BlockFileMeta& meta = sorted.meta;
    const uint32_t rpb = meta.records_per_block;
    ScratchRecord acc(41, meta.record_size);
    ScratchRecord combined(42, meta.record_size);
    ScratchRecord dummy(43, meta.record_size);
    ScratchRecord sentinel(44, meta.record_size);
    write_dummy(acc.slot().bytes());
    write_dummy(dummy.slot().bytes());
    write_dummy(sentinel.slot().bytes());

    uint64_t distinct = 0, out_index = 0;
    PlainBlock staging = PlainBlock::blank(out.base, 0, meta);
    uint32_t staged = 0;
    PlainBlock cur = sorted.read(0), next;
    for (uint64_t b = 0; b < n; ++b) {
        const bool has_next = b + 1 < n;
        if (has_next) next = sorted.read(b + 1);
        for (uint32_t r = 0; r < rpb; ++r) {
            RecordSlot rec = cur.slot(r);
            RecordSlot peek = r + 1 < rpb
                                  ? cur.slot(r + 1)
                                  : (has_next ? next.slot(0) : sentinel.slot());
            const bool continues = ct_key_equal(acc.slot(), rec);
            combine_values(agg, acc.slot().value(), rec.value(),
                           combined.slot().value());
            std::memcpy(combined.slot().data, rec.data, kKeyWidth);
            touch_record(acc.slot(), AccessOp::read);
            touch_record(rec, AccessOp::read);
            touch_record(combined.slot(), AccessOp::write);
            o_select(continues, combined.slot(), rec, acc.slot());
            const bool boundary = ct_key_compare(rec, peek) != 0;
            const bool emit_real = boundary && !ct_is_dummy(rec);
            if (emit_real) {
                o_select(true, acc.slot(), dummy.slot(), staging.slot(staged));
                distinct++;
                if (++staged == rpb) {
                    out.write(out_index++, staging);
                    staging = PlainBlock::blank(out.base, out_index, meta);
                    staged = 0;
                }
            }
        }
        cur = std::move(next);
    }
    if (staged > 0) out.write(out_index, staging);
    return distinct;
}

/// Standalone ORAM-based application: scan-map the input, sort the
/// key-value records with the ORAM-backed merge sort, aggregate in one pass.
TraceStats oram_baseline_app(std::vector<PlainBlock>& input,
                             const BlockFileMeta& meta,
                             const MapFunction& map_fn, const Aggregator& agg,
                             uint64_t seed, double* wall_ms) {
    const uint64_t n = input.size();
    const uint32_t rpb = meta.records_per_block;
    // Size the work area from a dry emission count (the mapper may emit
    // several records per input record).
    uint64_t emitted = 0;
    {
        RecordEmitter counter([&](auto, auto) { emitted++; });
        for (auto& block : input)
            for (uint32_t r = 0; r < rpb; ++r) {
                auto slot = block.slot(r);
                if (!record_is_dummy(slot.bytes())) map_fn(slot, counter);
            }
    }
    const uint64_t work_blocks = (emitted + rpb - 1) / rpb + 1;
    const uint64_t total_ids = n + 2 * work_blocks;

    OramConfig oram_cfg;
    oram_cfg.block_count = total_ids;
    oram_cfg.payload_size = meta.payload_size;
    oram_cfg.stash_capacity = 256;
    oram_cfg.seed = seed;
    PathOram oram(oram_cfg, bench_key());

    OramRange in_range{&oram, 0, meta};
    OramRange work_a{&oram, n, meta};
    OramRange work_b{&oram, n + work_blocks, meta};

    for (uint64_t i = 0; i < n; ++i) in_range.write(i, input[i]);

    WallTimer timer;
    TraceStats stats = capture_stats([&] {
        // Map: sequential ORAM reads, accumulate raw key-value blocks.
        uint64_t out_index = 0;
        PlainBlock staging = PlainBlock::blank(work_a.base, 0, meta);
        uint32_t filled = 0;
        RecordEmitter emitter([&](std::span<const uint8_t> key,
                                  std::span<const uint8_t> value) {
            RecordSlot slot = staging.slot(filled);
            std::memset(slot.data, 0, slot.size);
            std::memcpy(slot.data, key.data(), key.size());
            std::memcpy(slot.data + kKeyWidth, value.data(), value.size());
            touch_record(slot, AccessOp::write);
            if (++filled == rpb) {
                work_a.write(out_index++, staging);
                staging = PlainBlock::blank(work_a.base, out_index, meta);
                filled = 0;
            }
        });
        for (uint64_t i = 0; i < n; ++i) {
            PlainBlock block = in_range.read(i);
            for (uint32_t r = 0; r < rpb; ++r) {
                RecordSlot slot = block.slot(r);
                touch_record(slot, AccessOp::read);
                if (!record_is_dummy(slot.bytes())) map_fn(slot, emitter);
            }
        }
        uint64_t map_blocks = out_index;
        if (filled > 0) {
            for (uint32_t r = filled; r < rpb; ++r) {
                RecordSlot slot = staging.slot(r);
                write_dummy(slot.bytes());
                touch_record(slot, AccessOp::write);
            }
            work_a.write(out_index, staging);
            map_blocks++;
        }
        if (map_blocks == 0) return;
        OramRange sorted = oram_merge_sort(work_a, work_b, map_blocks);
        OramRange out =
            sorted.base == work_a.base ? work_b : work_a;
        oram_aggregate_scan(sorted, map_blocks, out, agg);
    });
    *wall_ms = timer.ms();
    return stats;
}

std::vector<PlainBlock> load_plain_file(const std::filesystem::path& path,
                                        uint64_t file_id, const SealKey& key) {
    BlockFile file = BlockFile::open(path);
    std::vector<PlainBlock> blocks;
    blocks.reserve(file.block_count());
    for (uint64_t b = 0; b < file.block_count(); ++b)
        blocks.push_back(
            unseal_block(file.read_block(b), file_id, b, key, file.meta()));
    return blocks;
}

// ---- scenario setup shared by sgxmr and baseline apps ----------------------

struct WordcountData {
    std::filesystem::path input;
    BlockFileMeta meta;
    uint64_t blocks;
};

WordcountData make_wordcount_input(const BenchOptions& opt,
                                   const std::filesystem::path& dir) {
    WordcountData data;
    data.meta = BlockFileMeta::for_block_size(opt.block_size, 128);
    const uint64_t tokens =
        opt.blocks * static_cast<uint64_t>(data.meta.records_per_block);
    auto corpus = zipf_corpus(5000, 1.0, tokens, opt.seed);
    data.input = dir / "wc_input.smr";
    encode_tokens(corpus, data.meta, data.input, 1, bench_key(),
                  /*tokens_per_fragment=*/1);
    data.blocks = BlockFile::open(data.input).block_count();
    return data;
}

struct KmeansData {
    std::filesystem::path input;
    BlockFileMeta meta;
    std::vector<Centroid> centroids;
    uint64_t blocks;
};

KmeansData make_kmeans_input(const BenchOptions& opt,
                             const std::filesystem::path& dir) {
    KmeansData data;
    data.meta = BlockFileMeta::for_block_size(opt.block_size, 68);
    const uint64_t points =
        opt.blocks * static_cast<uint64_t>(data.meta.records_per_block);
    auto pts = gaussian_mixture_points(points, kBenchKmeansClusters, 2,
                                       opt.seed + 1);
    data.input = dir / "km_input.smr";
    encode_points(pts, data.meta, data.input, 1, bench_key());
    for (uint64_t c = 0; c < kBenchKmeansClusters; ++c)
        data.centroids.push_back(
            Centroid{c, {pts[c % pts.size()][0], pts[c % pts.size()][1]}});
    data.blocks = BlockFile::open(data.input).block_count();
    return data;
}

JobConfig bench_job_config(uint32_t block_size, uint32_t record_size,
                           Aggregator agg) {
    JobConfig cfg;
    cfg.block_size = block_size;
    cfg.record_size = record_size;
    cfg.aggregator = agg;
    cfg.padding = PaddingMode::pad_then_postprocess;
    cfg.buffer_capacity = 4;
    cfg.sort = SortKind::bitonic;
    cfg.key = bench_key();
    return cfg;
}

}  // namespace

std::vector<std::string> bench_scenario_names() {
    return {"seq-scan",        "oram-scan",
            "bitonic-sort",    "merge-sort",
            "bitonic+oswap",   "wordcount-sgxmr",
            "wordcount-oram-baseline", "kmeans-sgxmr",
            "kmeans-oram-baseline"};
}

BenchRow run_bench_scenario(const std::string& name, const BenchOptions& opt) {
    const auto dir = workdir_for(opt);
    const SealKey key = bench_key();

    if (name == "seq-scan") {
        auto meta = BlockFileMeta::for_block_size(opt.block_size, 32);
        BlockFile file = make_random_file(dir / "scan.smr", meta, 1,
                                          opt.blocks, opt.seed);
        WallTimer timer;
        TraceStats stats = capture_stats([&] {
            for (uint64_t i = 0; i < opt.blocks; ++i)
                unseal_block(file.read_block(i), 1, i, key, meta);
        });
        return finish_row(name, opt.blocks, opt.block_size, stats, timer.ms());
    }

    if (name == "oram-scan") {
        OramConfig cfg;
        cfg.block_count = std::bit_ceil(opt.blocks);
        cfg.payload_size = opt.block_size;
        cfg.seed = opt.seed;
        PathOram oram(cfg, key);
        WallTimer timer;
        TraceStats stats = capture_stats([&] { oram.scan(opt.blocks); });
        return finish_row(name, opt.blocks, opt.block_size, stats, timer.ms());
    }

    if (name == "bitonic-sort" || name == "bitonic+oswap" ||
        name == "merge-sort") {
        const uint64_t n = std::bit_ceil(opt.blocks);
        auto meta = BlockFileMeta::for_block_size(opt.block_size,
                                                  opt.record_size);
        BlockFile in = make_random_file(dir / "sort_in.smr", meta, 1, n,
                                        opt.seed);
        BlockFile out = BlockFile::create(dir / "sort_out.smr", meta);
        EnclaveBuffer buffer(key, 4);
        WallTimer timer;
        TraceStats stats = capture_stats([&] {
            if (name == "merge-sort")
                merge_sort_blocks(FileBinding{&in, 1}, FileBinding{&out, 2},
                                  buffer);
            else
                bitonic_sort_blocks(FileBinding{&in, 1}, FileBinding{&out, 2},
                                    buffer,
                                    name == "bitonic+oswap"
                                        ? SwapMode::oblivious
                                        : SwapMode::plain);
        });
        return finish_row(name, n, opt.block_size, stats, timer.ms());
    }

    if (name == "wordcount-sgxmr") {
        auto data = make_wordcount_input(opt, dir);
        JobConfig cfg = bench_job_config(opt.block_size, 128,
                                         {AggregatorKind::count, 1});
        WallTimer timer;
        TraceStats stats = capture_stats([&] {
            run_job(cfg, wordcount_map(), data.input, 1, dir / "wc_out.smr");
        });
        return finish_row(name, data.blocks, opt.block_size, stats,
                          timer.ms());
    }

    if (name == "wordcount-oram-baseline") {
        auto data = make_wordcount_input(opt, dir);
        auto blocks = load_plain_file(data.input, 1, key);
        double wall = 0;
        TraceStats stats =
            oram_baseline_app(blocks, data.meta, wordcount_map(),
                              {AggregatorKind::count, 1}, opt.seed, &wall);
        return finish_row(name, data.blocks, opt.block_size, stats, wall);
    }

    if (name == "kmeans-sgxmr") {
        auto data = make_kmeans_input(opt, dir);
        JobConfig cfg =
            bench_job_config(opt.block_size, 68, {AggregatorKind::sum, 1});
        WallTimer timer;
        TraceStats stats = capture_stats([&] {
            run_job(cfg, kmeans_map(data.centroids, 2), data.input, 1,
                    dir / "km_out.smr");
        });
        return finish_row(name, data.blocks, opt.block_size, stats,
                          timer.ms());
    }

    if (name == "kmeans-oram-baseline") {
        auto data = make_kmeans_input(opt, dir);
        auto blocks = load_plain_file(data.input, 1, key);
        double wall = 0;
        TraceStats stats =
            oram_baseline_app(blocks, data.meta, kmeans_map(data.centroids, 2),
                              {AggregatorKind::sum, 1}, opt.seed, &wall);
        return finish_row(name, data.blocks, opt.block_size, stats, wall);
    }

    throw std::invalid_argument("unknown bench scenario: " + name);
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
    os << "scenario,blocks,block_size,untrusted_reads,untrusted_writes,"
          "enclave_record_touches,wall_ms\n";
    for (const BenchRow& row : rows)
        os << row.scenario << ',' << row.blocks << ',' << row.block_size << ','
           << row.untrusted_reads << ',' << row.untrusted_writes << ','
           << row.enclave_record_touches << ',' << row.wall_ms << '\n';
}

}  // namespace sgxmr

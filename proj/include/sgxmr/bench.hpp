#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgxmr/trace.hpp"

namespace sgxmr {

struct BenchOptions {
    uint64_t blocks = 64;        // input size in blocks
    uint32_t block_size = 1024;  // payload bytes
    uint32_t record_size = 32;   // for the sort scenarios
    uint64_t seed = 42;
    std::filesystem::path workdir;  // empty: std temp directory
};

struct BenchRow {
    std::string scenario;
    uint64_t blocks = 0;
    uint32_t block_size = 0;
    uint64_t untrusted_reads = 0;
    uint64_t untrusted_writes = 0;
    uint64_t enclave_record_touches = 0;
    double wall_ms = 0.0;
};

/// seq-scan, oram-scan, bitonic-sort, merge-sort, bitonic+oswap,
/// wordcount-sgxmr, wordcount-oram-baseline, kmeans-sgxmr,
/// kmeans-oram-baseline. The oram baselines are standalone pipelines (scan
/// map, ORAM-backed merge sort, aggregate scan) over ZeroTrace-style block
/// I/O; the sgxmr rows run the full engine. Counts come from a counting
/// capture, so the rows reconcile with trace_stats exactly.
std::vector<std::string> bench_scenario_names();

/// Throws std::invalid_argument for an unknown scenario name.
BenchRow run_bench_scenario(const std::string& name, const BenchOptions& opt);

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

}  // namespace sgxmr

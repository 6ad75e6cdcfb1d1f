#pragma once

#include <functional>
#include <optional>
#include <span>

#include "sgxmr/trace.hpp"

namespace sgxmr {

/// Shape parameters the auditor allows a trace to depend on. Inputs to an
/// obliviousness sweep must agree on all of them.
struct TraceShape {
    uint64_t block_count = 0;
    uint32_t records_per_block = 0;
    uint32_t record_size = 0;

    bool operator==(const TraceShape&) const = default;
};

struct ObliviousnessVerdict {
    bool oblivious = true;
    size_t witness_a = 0;      // input indices of the diverging pair
    size_t witness_b = 0;
    uint64_t divergence_seq = 0;  // first position where the traces differ
    bool length_mismatch = false;
    TraceEvent expected{};  // event in witness_a's trace at the divergence
    TraceEvent actual{};    // event in witness_b's trace at the divergence
};

/// Rewrites file ids to dense indices in order of first appearance, so two
/// runs that allocate fresh (but structurally identical) output files
/// compare equal. Nonces and ciphertext never reach the trace; events carry
/// addresses and ops only.
std::vector<TraceEvent> normalize_file_ids(const Trace& trace);

/// First position at which the normalized traces differ, or nullopt when
/// they are identical.
std::optional<uint64_t> first_divergence(const Trace& a, const Trace& b);

/// Captures the program once per input and verifies all traces are
/// pairwise identical (equality is transitive, so each run is compared to
/// the first). Throws std::invalid_argument when the inputs do not share a
/// shape. The program receives the input index and must run the computation
/// for that input.
ObliviousnessVerdict assert_oblivious(
    std::span<const TraceShape> shapes,
    const std::function<void(size_t input_index)>& program);

}  // namespace sgxmr

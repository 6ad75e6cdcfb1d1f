#include "sgxmr/audit.hpp"

#include <stdexcept>
#include <unordered_map>

namespace sgxmr {

std::vector<TraceEvent> normalize_file_ids(const Trace& trace) {
    std::vector<TraceEvent> out = trace.events;
    std::unordered_map<uint64_t, uint64_t> dense;
    for (TraceEvent& ev : out) {
        auto [it, inserted] = dense.try_emplace(ev.file_id, dense.size());
        ev.file_id = it->second;
    }
    return out;
}

std::optional<uint64_t> first_divergence(const Trace& a, const Trace& b) {
    const auto na = normalize_file_ids(a);
    const auto nb = normalize_file_ids(b);
    const size_t common = std::min(na.size(), nb.size());
    for (size_t i = 0; i < common; ++i)
        if (!na[i].same_access(nb[i])) return i;
    if (na.size() != nb.size()) return common;
    return std::nullopt;
}

ObliviousnessVerdict assert_oblivious(
    std::span<const TraceShape> shapes,
    const std::function<void(size_t input_index)>& program) {
    if (shapes.empty())
        throw std::invalid_argument("assert_oblivious needs at least one input");
    for (const TraceShape& shape : shapes)
        if (!(shape == shapes[0]))
            throw std::invalid_argument("inputs do not share a shape");

    Trace baseline = capture([&] { program(0); });
    const auto norm_base = normalize_file_ids(baseline);

    ObliviousnessVerdict verdict;
    for (size_t i = 1; i < shapes.size(); ++i) {
        Trace trace = capture([&] { program(i); });
        const auto norm = normalize_file_ids(trace);
        const size_t common = std::min(norm_base.size(), norm.size());
        for (size_t pos = 0; pos < common; ++pos) {
            if (!norm_base[pos].same_access(norm[pos])) {
                verdict.oblivious = false;
                verdict.witness_a = 0;
                verdict.witness_b = i;
                verdict.divergence_seq = pos;
                verdict.expected = norm_base[pos];
                verdict.actual = norm[pos];
                return verdict;
            }
        }
        if (norm_base.size() != norm.size()) {
            verdict.oblivious = false;
            verdict.witness_a = 0;
            verdict.witness_b = i;
            verdict.divergence_seq = common;
            verdict.length_mismatch = true;
            if (common < norm_base.size()) verdict.expected = norm_base[common];
            if (common < norm.size()) verdict.actual = norm[common];
            return verdict;
        }
    }
    return verdict;
}

}  // namespace sgxmr

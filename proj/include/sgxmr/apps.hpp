#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sgxmr/mapreduce.hpp"

namespace sgxmr {

struct Centroid {
    uint64_t cluster_id = 0;
    std::vector<double> coords;
};

/// Numeric vectors travel as 64-bit fixed point so aggregate sums stay
/// exact; the driver divides back to doubles.
inline constexpr int64_t kFixedPointScale = 1ll << 24;

inline int64_t to_fixed(double v) {
    return static_cast<int64_t>(std::llround(v * kFixedPointScale));
}
inline double from_fixed(int64_t v) {
    return static_cast<double>(v) / kFixedPointScale;
}

// ---- file encoding -------------------------------------------------------

/// Packs whitespace-separated tokens into text fragments, one fragment per
/// record value (greedy, never splitting a token), and seals the block file.
/// A token longer than the value field is an error. Returns the number of
/// real records; the short final block is dummy-padded. A nonzero
/// tokens_per_fragment caps how many tokens share a record, which pins the
/// map-output volume for shape-controlled runs.
uint64_t encode_tokens(const std::vector<std::string>& tokens,
                       const BlockFileMeta& meta,
                       const std::filesystem::path& out, uint64_t file_id,
                       const SealKey& key, size_t tokens_per_fragment = 0);

/// encode_tokens over the whitespace-split contents of a raw text file.
uint64_t encode_text_file(const std::filesystem::path& raw,
                          const BlockFileMeta& meta,
                          const std::filesystem::path& out, uint64_t file_id,
                          const SealKey& key);

/// One point per record: value lanes hold the fixed-point coordinates.
uint64_t encode_points(const std::vector<std::vector<double>>& points,
                       const BlockFileMeta& meta,
                       const std::filesystem::path& out, uint64_t file_id,
                       const SealKey& key);

struct DecodedRecord {
    std::vector<uint8_t> key;
    std::vector<uint8_t> value;
};

/// Test- and driver-side decryption of a whole file; dummies are skipped.
std::vector<DecodedRecord> decode_file(const std::filesystem::path& path,
                                       uint64_t file_id, const SealKey& key);

// ---- sample applications -------------------------------------------------

/// Emits one (token, 1) record per whitespace-delimited token of the input
/// fragment, lowercased and truncated to the key width.
MapFunction wordcount_map();

/// Emits (nearest centroid id, [point coords, 1]); squared Euclidean
/// distance, ties to the smaller cluster id.
MapFunction kmeans_map(std::vector<Centroid> centroids, uint32_t dims);

struct WordCountRun {
    JobResult job;
    std::map<std::string, uint64_t> counts;
};

WordCountRun run_wordcount(const JobConfig& cfg,
                           const std::filesystem::path& input,
                           uint64_t input_file_id,
                           const std::filesystem::path& output);

struct KMeansRun {
    JobResult job;
    std::vector<Centroid> centroids;  // after one iteration
};

/// One assignment + recomputation iteration; clusters that attract no
/// points keep their previous centroid.
KMeansRun run_kmeans(const JobConfig& cfg, const std::filesystem::path& input,
                     uint64_t input_file_id,
                     const std::vector<Centroid>& initial,
                     const std::filesystem::path& output);

// ---- plaintext oracles ----------------------------------------------------

std::vector<std::string> tokenize_fragment(std::string_view text);

/// Hash-map WordCount over raw tokens, with the same case folding and key
/// truncation as the map function.
std::map<std::string, uint64_t> wordcount_oracle(
    const std::vector<std::string>& tokens);

/// One KMeans iteration in plain doubles over the fixed-point-quantized
/// points (the same values the engine sees).
std::vector<Centroid> kmeans_oracle(
    const std::vector<std::vector<double>>& points,
    const std::vector<Centroid>& initial);

// ---- synthetic corpora ----------------------------------------------------

/// Zipf(s) draw of n tokens over a synthetic vocabulary w0..w{vocab-1}.
std::vector<std::string> zipf_corpus(size_t vocab, double s, size_t n,
                                     uint64_t seed);

/// Exactly `distinct` different words in exactly `tokens` tokens: each word
/// appears once, the rest are drawn with a seed-dependent skew. Every corpus
/// from this generator has the same shape, so obliviousness sweeps can vary
/// only the group structure.
std::vector<std::string> fixed_shape_corpus(size_t distinct, size_t tokens,
                                            uint64_t seed);

std::vector<std::vector<double>> gaussian_mixture_points(size_t n, size_t k,
                                                         uint32_t dims,
                                                         uint64_t seed);

/// Spearman rank correlation between two equally long samples.
double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b);

}  // namespace sgxmr

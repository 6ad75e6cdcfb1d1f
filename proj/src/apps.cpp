#include "sgxmr/apps.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sgxmr/enclave.hpp"

namespace sgxmr {

namespace {

uint64_t load_le64(const uint8_t* p) {
    uint64_t v = 0;
    std::memcpy(&v, p, 8);
    return v;
}

void store_le64(uint8_t* p, uint64_t v) { std::memcpy(p, &v, 8); }

// Big-endian cluster ids make lexicographic key order numeric.
void store_be64(uint8_t* p, uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (8 * (7 - i)));
}

uint64_t load_be64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
}

/// Shared sink for the encoders: fills blocks record by record, dummy-pads
/// the final short block, and seals everything under (file_id, block index).
class FileEncoder {
  public:
    FileEncoder(const BlockFileMeta& meta, const std::filesystem::path& out,
                uint64_t file_id, const SealKey& key)
        : meta_(meta),
          file_(BlockFile::create(out, meta)),
          file_id_(file_id),
          key_(key),
          block_(PlainBlock::blank(file_id, 0, meta)) {}

    void add_record(std::span<const uint8_t> key_bytes,
                    std::span<const uint8_t> value_bytes) {
        RecordSlot slot = block_.slot(filled_);
        std::memset(slot.data, 0, slot.size);
        std::memcpy(slot.data, key_bytes.data(), key_bytes.size());
        std::memcpy(slot.data + kKeyWidth, value_bytes.data(),
                    value_bytes.size());
        records_++;
        if (++filled_ == meta_.records_per_block) flush();
    }

    uint64_t finish() {
        if (filled_ > 0) flush();
        return records_;
    }

  private:
    void flush() {
        file_.write_block(file_.block_count(), seal_block(block_, key_));
        block_ = PlainBlock::blank(file_id_, file_.block_count(), meta_);
        filled_ = 0;
    }

    BlockFileMeta meta_;
    BlockFile file_;
    uint64_t file_id_;
    SealKey key_;
    PlainBlock block_;
    uint32_t filled_ = 0;
    uint64_t records_ = 0;
};

}  // namespace

std::vector<std::string> tokenize_fragment(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == '\0') {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            if (c == '\0') break;
        } else {
            current.push_back(static_cast<char>(
                std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    for (auto& t : tokens)
        if (t.size() > kKeyWidth) t.resize(kKeyWidth);
    return tokens;
}

uint64_t encode_tokens(const std::vector<std::string>& tokens,
                       const BlockFileMeta& meta,
                       const std::filesystem::path& out, uint64_t file_id,
                       const SealKey& key, size_t tokens_per_fragment) {
    const uint32_t value_width = meta.record_size - kKeyWidth;
    FileEncoder encoder(meta, out, file_id, key);
    uint64_t ordinal = 0;
    std::string fragment;
    size_t fragment_tokens = 0;
    auto emit_fragment = [&] {
        uint8_t key_bytes[kKeyWidth] = {};
        store_le64(key_bytes, ordinal++);
        encoder.add_record(
            key_bytes,
            {reinterpret_cast<const uint8_t*>(fragment.data()), fragment.size()});
        fragment.clear();
        fragment_tokens = 0;
    };
    for (const std::string& token : tokens) {
        if (token.size() > value_width)
            throw std::invalid_argument("token longer than the value field: " +
                                        token);
        const size_t need = fragment.empty() ? token.size() : token.size() + 1;
        const bool full =
            fragment.size() + need > value_width ||
            (tokens_per_fragment > 0 && fragment_tokens == tokens_per_fragment);
        if (full) emit_fragment();
        if (!fragment.empty()) fragment.push_back(' ');
        fragment += token;
        fragment_tokens++;
    }
    if (!fragment.empty()) emit_fragment();
    return encoder.finish();
}

uint64_t encode_text_file(const std::filesystem::path& raw,
                          const BlockFileMeta& meta,
                          const std::filesystem::path& out, uint64_t file_id,
                          const SealKey& key) {
    std::ifstream in(raw);
    if (!in) throw std::runtime_error("cannot open input: " + raw.string());
    std::vector<std::string> tokens;
    std::string token;
    while (in >> token) tokens.push_back(token);
    return encode_tokens(tokens, meta, out, file_id, key);
}

uint64_t encode_points(const std::vector<std::vector<double>>& points,
                       const BlockFileMeta& meta,
                       const std::filesystem::path& out, uint64_t file_id,
                       const SealKey& key) {
    FileEncoder encoder(meta, out, file_id, key);
    const uint32_t value_width = meta.record_size - kKeyWidth;
    uint64_t ordinal = 0;
    for (const auto& point : points) {
        if (point.size() * 8 > value_width)
            throw std::invalid_argument("point does not fit the value field");
        uint8_t key_bytes[kKeyWidth] = {};
        store_le64(key_bytes, ordinal++);
        std::vector<uint8_t> value(value_width, 0);
        for (size_t d = 0; d < point.size(); ++d)
            store_le64(value.data() + 8 * d,
                       static_cast<uint64_t>(to_fixed(point[d])));
        encoder.add_record(key_bytes, value);
    }
    return encoder.finish();
}

std::vector<DecodedRecord> decode_file(const std::filesystem::path& path,
                                       uint64_t file_id, const SealKey& key) {
    BlockFile file = BlockFile::open(path);
    std::vector<DecodedRecord> records;
    for (uint64_t b = 0; b < file.block_count(); ++b) {
        PlainBlock plain =
            unseal_block(file.read_block(b), file_id, b, key, file.meta());
        for (uint32_t r = 0; r < plain.records_per_block; ++r) {
            auto bytes = plain.slot(r).bytes();
            if (record_is_dummy(bytes)) continue;
            DecodedRecord rec;
            rec.key.assign(bytes.begin(), bytes.begin() + kKeyWidth);
            rec.value.assign(bytes.begin() + kKeyWidth, bytes.end());
            records.push_back(std::move(rec));
        }
    }
    return records;
}

MapFunction wordcount_map() {
    return [](const RecordSlot& input, RecordEmitter& emit) {
        const auto value = input.value();
        const std::string_view text(reinterpret_cast<const char*>(value.data()),
                                    value.size());
        uint8_t one[8] = {1, 0, 0, 0, 0, 0, 0, 0};
        for (const std::string& token : tokenize_fragment(text))
            emit.emit(token, one);
    };
}

MapFunction kmeans_map(std::vector<Centroid> centroids, uint32_t dims) {
    if (centroids.empty())
        throw std::invalid_argument("kmeans needs at least one centroid");
    for (const auto& c : centroids)
        if (c.coords.size() != dims)
            throw std::invalid_argument("centroid dimension mismatch");
    return [centroids = std::move(centroids), dims](const RecordSlot& input,
                                                    RecordEmitter& emit) {
        const auto value = input.value();
        std::vector<double> point(dims);
        for (uint32_t d = 0; d < dims; ++d)
            point[d] = from_fixed(
                static_cast<int64_t>(load_le64(value.data() + 8 * d)));
        uint64_t best = centroids[0].cluster_id;
        double best_dist = std::numeric_limits<double>::infinity();
        for (const auto& c : centroids) {
            double dist = 0;
            for (uint32_t d = 0; d < dims; ++d) {
                const double diff = point[d] - c.coords[d];
                dist += diff * diff;
            }
            if (dist < best_dist ||
                (dist == best_dist && c.cluster_id < best)) {
                best_dist = dist;
                best = c.cluster_id;
            }
        }
        uint8_t key_bytes[kKeyWidth] = {};
        store_be64(key_bytes, best);
        std::vector<uint8_t> out_value((dims + 1) * 8, 0);
        for (uint32_t d = 0; d < dims; ++d)
            std::memcpy(out_value.data() + 8 * d, value.data() + 8 * d, 8);
        store_le64(out_value.data() + 8 * dims, 1);
        emit.emit(std::span<const uint8_t>(key_bytes, kKeyWidth), out_value);
    };
}

WordCountRun run_wordcount(const JobConfig& cfg,
                           const std::filesystem::path& input,
                           uint64_t input_file_id,
                           const std::filesystem::path& output) {
    WordCountRun run;
    run.job = run_job(cfg, wordcount_map(), input, input_file_id, output);
    for (const DecodedRecord& rec :
         decode_file(output, run.job.output_file_id, cfg.key)) {
        const size_t len = strnlen(reinterpret_cast<const char*>(rec.key.data()),
                                   rec.key.size());
        std::string word(reinterpret_cast<const char*>(rec.key.data()), len);
        run.counts[word] = load_le64(rec.value.data());
    }
    return run;
}

KMeansRun run_kmeans(const JobConfig& cfg, const std::filesystem::path& input,
                     uint64_t input_file_id,
                     const std::vector<Centroid>& initial,
                     const std::filesystem::path& output) {
    if (cfg.aggregator.kind != AggregatorKind::sum)
        throw std::invalid_argument("kmeans requires the sum aggregator");
    const uint32_t dims =
        initial.empty() ? 0 : static_cast<uint32_t>(initial[0].coords.size());
    if ((dims + 1) * 8 > cfg.value_size())
        throw std::invalid_argument("value field too small for the dimension");

    KMeansRun run;
    run.job =
        run_job(cfg, kmeans_map(initial, dims), input, input_file_id, output);
    run.centroids = initial;
    for (const DecodedRecord& rec :
         decode_file(output, run.job.output_file_id, cfg.key)) {
        const uint64_t id = load_be64(rec.key.data());
        const uint64_t count = load_le64(rec.value.data() + 8 * dims);
        if (count == 0) continue;
        for (auto& c : run.centroids) {
            if (c.cluster_id != id) continue;
            for (uint32_t d = 0; d < dims; ++d) {
                const int64_t sum =
                    static_cast<int64_t>(load_le64(rec.value.data() + 8 * d));
                c.coords[d] = from_fixed(sum) / static_cast<double>(count);
            }
        }
    }
    return run;
}

std::map<std::string, uint64_t> wordcount_oracle(
    const std::vector<std::string>& tokens) {
    std::map<std::string, uint64_t> counts;
    for (const std::string& raw : tokens) {
        std::string token;
        for (char c : raw)
            token.push_back(static_cast<char>(
                std::tolower(static_cast<unsigned char>(c))));
        if (token.size() > kKeyWidth) token.resize(kKeyWidth);
        if (!token.empty()) counts[token]++;
    }
    return counts;
}

std::vector<Centroid> kmeans_oracle(
    const std::vector<std::vector<double>>& points,
    const std::vector<Centroid>& initial) {
    const size_t dims = initial.empty() ? 0 : initial[0].coords.size();
    std::vector<std::vector<double>> sums(initial.size(),
                                          std::vector<double>(dims, 0.0));
    std::vector<uint64_t> counts(initial.size(), 0);
    for (const auto& raw : points) {
        // The engine sees fixed-point-quantized coordinates; assign on the
        // same values.
        std::vector<double> p(dims);
        for (size_t d = 0; d < dims; ++d) p[d] = from_fixed(to_fixed(raw[d]));
        size_t best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < initial.size(); ++c) {
            double dist = 0;
            for (size_t d = 0; d < dims; ++d) {
                const double diff = p[d] - initial[c].coords[d];
                dist += diff * diff;
            }
            if (dist < best_dist ||
                (dist == best_dist &&
                 initial[c].cluster_id < initial[best].cluster_id)) {
                best_dist = dist;
                best = c;
            }
        }
        for (size_t d = 0; d < dims; ++d) sums[best][d] += p[d];
        counts[best]++;
    }
    std::vector<Centroid> out = initial;
    for (size_t c = 0; c < out.size(); ++c) {
        if (counts[c] == 0) continue;
        for (size_t d = 0; d < dims; ++d)
            out[c].coords[d] = sums[c][d] / static_cast<double>(counts[c]);
    }
    return out;
}

std::vector<std::string> zipf_corpus(size_t vocab, double s, size_t n,
                                     uint64_t seed) {
    std::vector<double> weights(vocab);
    for (size_t r = 0; r < vocab; ++r)
        weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), s);
    std::discrete_distribution<size_t> pick(weights.begin(), weights.end());
    std::mt19937_64 rng(seed);
    std::vector<std::string> tokens;
    tokens.reserve(n);
    char buf[16];
    for (size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "w%05zu", pick(rng));
        tokens.emplace_back(buf);
    }
    return tokens;
}

std::vector<std::string> fixed_shape_corpus(size_t distinct, size_t tokens,
                                            uint64_t seed) {
    if (tokens < distinct)
        throw std::invalid_argument("need at least one token per word");
    std::mt19937_64 rng(seed);
    std::vector<size_t> ids(distinct);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);

    std::vector<size_t> draws;
    draws.reserve(tokens);
    for (size_t i = 0; i < distinct; ++i) draws.push_back(ids[i]);
    // The remainder follows a seed-dependent skew over the shuffled
    // vocabulary, so group sizes differ corpus to corpus while the token
    // count and distinct-word count stay fixed.
    std::uniform_real_distribution<double> exponent(0.0, 2.0);
    const double s = exponent(rng);
    std::vector<double> weights(distinct);
    for (size_t r = 0; r < distinct; ++r)
        weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), s);
    std::discrete_distribution<size_t> pick(weights.begin(), weights.end());
    for (size_t i = distinct; i < tokens; ++i) draws.push_back(ids[pick(rng)]);
    std::shuffle(draws.begin(), draws.end(), rng);

    std::vector<std::string> out;
    out.reserve(tokens);
    char buf[16];
    for (size_t id : draws) {
        std::snprintf(buf, sizeof(buf), "w%05zu", id);
        out.emplace_back(buf);
    }
    return out;
}

std::vector<std::vector<double>> gaussian_mixture_points(size_t n, size_t k,
                                                         uint32_t dims,
                                                         uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mean(-50.0, 50.0);
    std::normal_distribution<double> noise(0.0, 5.0);
    std::uniform_int_distribution<size_t> component(0, k - 1);
    std::vector<std::vector<double>> means(k, std::vector<double>(dims));
    for (auto& m : means)
        for (auto& v : m) v = mean(rng);
    std::vector<std::vector<double>> points(n, std::vector<double>(dims));
    for (auto& p : points) {
        const auto& m = means[component(rng)];
        for (uint32_t d = 0; d < dims; ++d) p[d] = m[d] + noise(rng);
    }
    return points;
}

double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("rank correlation needs equal-size samples");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t x, size_t y) { return v[x] < v[y]; });
        std::vector<double> rank(v.size());
        size_t i = 0;
        while (i < order.size()) {
            size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) j++;
            const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
            for (size_t t = i; t <= j; ++t) rank[order[t]] = avg;
            i = j + 1;
        }
        return rank;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

}  // namespace sgxmr

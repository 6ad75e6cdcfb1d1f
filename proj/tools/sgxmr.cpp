// Command-line front end: encode block files, run jobs, audit access
// patterns, and benchmark scenario costs.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "sgxmr/apps.hpp"
#include "sgxmr/audit.hpp"
#include "sgxmr/bench.hpp"
#include "sgxmr/mapreduce.hpp"
#include "sgxmr/path_oram.hpp"

using namespace sgxmr;

namespace {

std::vector<Centroid> load_centroids(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open centroids: " + path.string());
    std::vector<Centroid> out;
    std::string line;
    uint64_t id = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        Centroid c;
        c.cluster_id = id++;
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) c.coords.push_back(std::stod(field));
        out.push_back(std::move(c));
    }
    return out;
}

int run_encode(const std::string& in, const std::string& out,
               uint32_t block_size, uint32_t record_size,
               const std::string& key_hex, const std::string& format,
               uint64_t file_id) {
    const SealKey key = SealKey::from_hex(key_hex);
    const auto meta = BlockFileMeta::for_block_size(block_size, record_size);
    uint64_t records = 0;
    if (format == "text") {
        records = encode_text_file(in, meta, out, file_id, key);
    } else if (format == "points") {
        std::ifstream raw(in);
        if (!raw) throw std::runtime_error("cannot open input: " + in);
        std::vector<std::vector<double>> points;
        std::string line;
        while (std::getline(raw, line)) {
            if (line.empty()) continue;
            std::vector<double> p;
            std::istringstream fields(line);
            std::string field;
            while (std::getline(fields, field, ',')) p.push_back(std::stod(field));
            points.push_back(std::move(p));
        }
        records = encode_points(points, meta, out, file_id, key);
    } else {
        throw std::runtime_error("unknown format: " + format);
    }
    const auto blocks = BlockFile::open(out).block_count();
    std::cout << "encoded " << records << " records into " << blocks
              << " blocks (" << out << ")\n";
    return 0;
}

int run_run(const std::string& job, const std::string& config_path,
            const std::string& in, const std::string& out, uint64_t file_id,
            const std::string& centroids_path) {
    JobConfig cfg = load_job_config(config_path);
    if (job == "wordcount") {
        auto run = run_wordcount(cfg, in, file_id, out);
        std::cout << "distinct keys: " << run.job.distinct_keys << "\n"
                  << "output blocks: " << run.job.output_blocks << "\n";
    } else if (job == "kmeans") {
        if (centroids_path.empty())
            throw std::runtime_error("kmeans needs --centroids");
        auto initial = load_centroids(centroids_path);
        auto run = run_kmeans(cfg, in, file_id, initial, out);
        std::cout << "distinct keys: " << run.job.distinct_keys << "\n";
        for (const auto& c : run.centroids) {
            std::cout << "centroid " << c.cluster_id << ":";
            for (double v : c.coords) std::cout << ' ' << v;
            std::cout << "\n";
        }
    } else {
        throw std::runtime_error("unknown job: " + job);
    }
    return 0;
}

void print_event(std::ostream& os, const TraceEvent& ev) {
    os << "seq=" << ev.seq << " region="
       << (ev.region == Region::untrusted ? "untrusted" : "enclave")
       << " granularity="
       << (ev.granularity == Granularity::block ? "block" : "record")
       << " op=" << (ev.op == AccessOp::read ? "read" : "write")
       << " file=" << ev.file_id << " block=" << ev.block_id;
    if (ev.granularity == Granularity::record)
        os << " record=" << ev.record_index;
}

int run_audit(const std::string& job, size_t sweeps,
              const std::string& config_path,
              const std::string& dump_trace) {
    JobConfig cfg;
    cfg.block_size = 256;
    cfg.record_size = 32;
    cfg.buffer_capacity = 4;
    cfg.key = SealKey::from_hex("000102030405060708090a0b0c0d0e0f");
    if (!config_path.empty()) cfg = load_job_config(config_path);

    const auto dir = std::filesystem::temp_directory_path() /
                     ("sgxmr_audit_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);

    const size_t distinct = 8;
    const uint32_t rpb = cfg.meta().records_per_block;
    const size_t tokens = 16 * static_cast<size_t>(rpb) * 2;

    std::function<void(size_t)> program;
    std::vector<TraceShape> shapes;
    if (job == "wordcount" || job == "bitonic" || job == "merge") {
        for (size_t i = 0; i < sweeps; ++i)
            shapes.push_back(TraceShape{16, rpb, cfg.record_size});
        program = [&, dir](size_t i) {
            const auto in = dir / ("in_" + std::to_string(i) + ".smr");
            auto corpus = fixed_shape_corpus(distinct, tokens, 1000 + i);
            if (i + 1 == sweeps) {
                // adversarial corner: maximal skew, same shape
                corpus.assign(tokens, corpus[0]);
                for (size_t d = 0; d < distinct; ++d) corpus[d] = "w" + std::to_string(d);
            }
            encode_tokens(corpus, cfg.meta(), in, 1, cfg.key, 2);
            if (job == "wordcount") {
                JobConfig job_cfg = cfg;
                run_job(job_cfg, wordcount_map(), in,
                        1, dir / ("out_" + std::to_string(i) + ".smr"));
            } else {
                BlockFile in_file = BlockFile::open(in);
                BlockFile out_file = BlockFile::create(
                    dir / ("sorted_" + std::to_string(i) + ".smr"), cfg.meta());
                EnclaveBuffer buffer(cfg.key, cfg.buffer_capacity);
                if (job == "bitonic")
                    bitonic_sort_blocks(FileBinding{&in_file, 1},
                                        FileBinding{&out_file, 2}, buffer);
                else
                    merge_sort_blocks(FileBinding{&in_file, 1},
                                      FileBinding{&out_file, 2}, buffer);
            }
        };
    } else if (job == "kmeans") {
        for (size_t i = 0; i < sweeps; ++i)
            shapes.push_back(TraceShape{16, rpb, cfg.record_size});
        program = [&, dir](size_t i) {
            const auto in = dir / ("in_" + std::to_string(i) + ".smr");
            auto points = gaussian_mixture_points(16 * rpb, 4, 2, 2000 + i);
            encode_points(points, cfg.meta(), in, 1, cfg.key);
            JobConfig job_cfg = cfg;
            job_cfg.aggregator = {AggregatorKind::sum, 1};
            std::vector<Centroid> centroids;
            for (uint64_t c = 0; c < 4; ++c)
                centroids.push_back(Centroid{c, {points[c][0], points[c][1]}});
            run_job(job_cfg, kmeans_map(centroids, 2), in, 1,
                    dir / ("out_" + std::to_string(i) + ".smr"));
        };
    } else {
        throw std::runtime_error("unknown audit job: " + job);
    }

    if (!dump_trace.empty()) {
        Trace trace = capture([&] { program(0); });
        std::ofstream out(dump_trace);
        trace.write_text(out);
        std::cout << "trace written to " << dump_trace << " ("
                  << trace.events.size() << " events)\n";
    }

    ObliviousnessVerdict verdict = assert_oblivious(shapes, program);
    std::filesystem::remove_all(dir);
    if (verdict.oblivious) {
        std::cout << "oblivious: " << sweeps << " sweeps, traces identical\n";
        return 0;
    }
    std::cout << "DISTINGUISHABLE: inputs " << verdict.witness_a << " and "
              << verdict.witness_b << " diverge at seq "
              << verdict.divergence_seq << "\n  expected: ";
    print_event(std::cout, verdict.expected);
    std::cout << "\n  actual:   ";
    print_event(std::cout, verdict.actual);
    std::cout << "\n";
    return 1;
}

int run_bench(const std::string& scenarios_arg, const std::string& out_csv,
              uint64_t blocks, uint32_t block_size, uint64_t seed) {
    std::vector<std::string> names;
    if (scenarios_arg == "all") {
        names = bench_scenario_names();
    } else {
        std::istringstream list(scenarios_arg);
        std::string name;
        while (std::getline(list, name, ',')) names.push_back(name);
    }
    BenchOptions opt;
    opt.blocks = blocks;
    opt.block_size = block_size;
    opt.seed = seed;
    std::vector<BenchRow> rows;
    for (const auto& name : names) {
        std::cerr << "running " << name << "...\n";
        rows.push_back(run_bench_scenario(name, opt));
    }
    if (out_csv.empty() || out_csv == "-") {
        write_bench_csv(std::cout, rows);
    } else {
        std::ofstream out(out_csv);
        write_bench_csv(out, rows);
        std::cout << "wrote " << rows.size() << " rows to " << out_csv << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Oblivious single-node MapReduce over sealed block files"};
    app.require_subcommand(1);

    // encode
    auto* encode = app.add_subcommand("encode", "encode raw input as a sealed block file");
    std::string enc_in, enc_out, enc_key, enc_format = "text";
    uint32_t enc_block = 1024, enc_record = 64;
    uint64_t enc_fid = 1;
    encode->add_option("--in", enc_in, "raw input path")->required();
    encode->add_option("--out", enc_out, "output block file")->required();
    encode->add_option("--block-size", enc_block, "block payload bytes");
    encode->add_option("--record-size", enc_record, "record bytes");
    encode->add_option("--key", enc_key, "seal key, 32 hex chars")->required();
    encode->add_option("--format", enc_format, "text | points");
    encode->add_option("--file-id", enc_fid, "file id to seal under");

    // run
    auto* run = app.add_subcommand("run", "run a MapReduce job");
    std::string run_job_name, run_cfg, run_in, run_out, run_centroids;
    uint64_t run_fid = 1;
    run->add_option("--job", run_job_name, "wordcount | kmeans")->required();
    run->add_option("--config", run_cfg, "job config file")->required();
    run->add_option("--in", run_in, "input block file")->required();
    run->add_option("--out", run_out, "output block file")->required();
    run->add_option("--file-id", run_fid, "input file id");
    run->add_option("--centroids", run_centroids,
                    "initial centroids CSV (kmeans)");

    // audit
    auto* audit = app.add_subcommand(
        "audit", "sweep equal-shape inputs and check trace equality");
    std::string audit_job, audit_cfg, audit_dump;
    size_t audit_sweeps = 20;
    audit->add_option("--job", audit_job,
                      "wordcount | kmeans | bitonic | merge")->required();
    audit->add_option("--sweeps", audit_sweeps, "number of random inputs");
    audit->add_option("--config", audit_cfg, "job config file");
    audit->add_option("--dump-trace", audit_dump,
                      "write the first trace as text");

    // bench
    auto* bench = app.add_subcommand("bench", "run cost scenarios, emit CSV");
    std::string bench_scenarios = "all", bench_out;
    uint64_t bench_blocks = 64, bench_seed = 42;
    uint32_t bench_block_size = 1024;
    bench->add_option("--scenarios", bench_scenarios,
                      "comma-separated names or 'all'");
    bench->add_option("--out", bench_out, "CSV path ('-' for stdout)");
    bench->add_option("--blocks", bench_blocks, "input blocks");
    bench->add_option("--block-size", bench_block_size, "block payload bytes");
    bench->add_option("--seed", bench_seed, "corpus seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (encode->parsed())
            return run_encode(enc_in, enc_out, enc_block, enc_record, enc_key,
                              enc_format, enc_fid);
        if (run->parsed())
            return run_run(run_job_name, run_cfg, run_in, run_out, run_fid,
                           run_centroids);
        if (audit->parsed())
            return run_audit(audit_job, audit_sweeps, audit_cfg, audit_dump);
        if (bench->parsed())
            return run_bench(bench_scenarios, bench_out, bench_blocks,
                             bench_block_size, bench_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

#include <doctest.h>

#include <cstring>
#include <fstream>

#include "sgxmr/block_store.hpp"
#include "sgxmr/enclave.hpp"
#include "sgxmr/trace.hpp"
#include "testutil.hpp"

using namespace sgxmr;
using namespace sgxmr::test;

namespace {

SealedBlock make_sealed(const BlockFileMeta& meta, uint64_t file_id,
                        uint64_t block_id, uint8_t fill = 0) {
    PlainBlock plain = PlainBlock::blank(file_id, block_id, meta);
    std::fill(plain.payload.begin(), plain.payload.end(), fill);
    return seal_block(plain, test_key());
}

}  // namespace

TEST_CASE("meta arithmetic") {
    auto meta = BlockFileMeta::exact(64, 32);
    CHECK(meta.payload_size == 2048);

    CHECK_THROWS_AS(BlockFileMeta::exact(64, 0), std::invalid_argument);
    CHECK_THROWS_AS(BlockFileMeta::exact(16, 4), std::invalid_argument);

    // The 2 KB / 30-records-per-block KMeans geometry: record size rounds to
    // 68 and the 8 leftover payload bytes stay zero.
    auto kmeans = BlockFileMeta::for_records_per_block(2048, 30);
    CHECK(kmeans.record_size == 68);
    CHECK(kmeans.records_per_block == 30);
    CHECK(kmeans.payload_size == 2048);

    auto by_size = BlockFileMeta::for_block_size(2048, 64);
    CHECK(by_size.records_per_block == 32);
    CHECK(by_size.payload_size == 2048);
}

TEST_CASE("write then read round-trips bytes") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(32, 4);
    BlockFile file = BlockFile::create(dir / "f.smr", meta);
    SealedBlock block = make_sealed(meta, 9, 0);
    file.write_block(0, block);
    SealedBlock back = file.read_block(0);
    CHECK(back.header.file_id == block.header.file_id);
    CHECK(back.header.block_id == block.header.block_id);
    CHECK(back.header.nonce == block.header.nonce);
    CHECK(back.ciphertext == block.ciphertext);
    CHECK(back.auth_tag == block.auth_tag);
}

TEST_CASE("read past the end and write gaps are rejected") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(32, 4);
    BlockFile file = BlockFile::create(dir / "f.smr", meta);
    file.write_block(0, make_sealed(meta, 1, 0));
    CHECK_THROWS_AS(file.read_block(1), std::out_of_range);
    CHECK_THROWS_AS(file.write_block(2, make_sealed(meta, 1, 2)),
                    std::out_of_range);
}

TEST_CASE("payload size mismatch is rejected") {
    TempDir dir;
    BlockFile file = BlockFile::create(dir / "f.smr", BlockFileMeta::exact(32, 4));
    SealedBlock wrong = make_sealed(BlockFileMeta::exact(32, 8), 1, 0);
    CHECK_THROWS_AS(file.write_block(0, wrong), std::invalid_argument);
}

TEST_CASE("overwrite keeps block count and emits one write event") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(32, 4);
    BlockFile file = BlockFile::create(dir / "f.smr", meta);
    file.write_block(0, make_sealed(meta, 1, 0));
    file.write_block(1, make_sealed(meta, 1, 1));
    Trace trace = capture([&] { file.write_block(1, make_sealed(meta, 1, 1, 0xAB)); });
    CHECK(file.block_count() == 2);
    REQUIRE(trace.events.size() == 1);
    CHECK(trace.events[0].op == AccessOp::write);
    CHECK(trace.events[0].region == Region::untrusted);
    CHECK(trace.events[0].block_id == 1);
}

TEST_CASE("sequential scan of 21000 blocks emits ascending reads") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(17, 1);
    BlockFile file = BlockFile::create(dir / "big.smr", meta);
    const uint64_t n = 21000;
    for (uint64_t i = 0; i < n; ++i)
        file.write_block(i, make_sealed(meta, 3, i));

    Trace trace = capture([&] {
        for (uint64_t i = 0; i < n; ++i) file.read_block(i);
    });
    REQUIRE(trace.events.size() == n);
    for (uint64_t i = 0; i < n; ++i) {
        CHECK(trace.events[i].op == AccessOp::read);
        CHECK(trace.events[i].granularity == Granularity::block);
        CHECK(trace.events[i].region == Region::untrusted);
        CHECK(trace.events[i].block_id == i);
    }
}

TEST_CASE("scan trace depends only on block count") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(32, 4);
    std::mt19937_64 rng(11);
    auto scan_trace = [&](const std::filesystem::path& p, uint8_t fill) {
        BlockFile file = BlockFile::create(p, meta);
        for (uint64_t i = 0; i < 16; ++i)
            file.write_block(i, make_sealed(meta, 7, i, fill));
        return capture([&] {
            for (uint64_t i = 0; i < 16; ++i) file.read_block(i);
        });
    };
    Trace a = scan_trace(dir / "a.smr", 1);
    Trace b = scan_trace(dir / "b.smr", 250);
    REQUIRE(a.events.size() == b.events.size());
    for (size_t i = 0; i < a.events.size(); ++i)
        CHECK(a.events[i].same_access(b.events[i]));
}

TEST_CASE("every stored block serializes to the same length") {
    TempDir dir;
    auto meta = BlockFileMeta::for_records_per_block(2048, 30);
    BlockFile file = BlockFile::create(dir / "f.smr", meta);
    for (uint64_t i = 0; i < 5; ++i)
        file.write_block(i, make_sealed(meta, 2, i, static_cast<uint8_t>(i)));
    const auto file_size = std::filesystem::file_size(dir / "f.smr");
    const auto stride = kBlockOverhead + meta.payload_size;
    CHECK(file_size == 38 + 5 * stride);
    for (uint64_t i = 0; i < 5; ++i)
        CHECK(file.read_block(i).serialized_size() == stride);
}

TEST_CASE("file format golden header") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(64, 32);
    {
        BlockFile file = BlockFile::create(dir / "g.smr", meta);
        file.write_block(0, make_sealed(meta, 0x1122334455667788ull, 0));
    }
    std::ifstream raw(dir / "g.smr", std::ios::binary);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(raw)),
                               std::istreambuf_iterator<char>());
    REQUIRE(bytes.size() >= 38 + 44);
    CHECK(std::memcmp(bytes.data(), "SGMR", 4) == 0);
    CHECK(bytes[4] == 1);  // version u16 LE
    CHECK(bytes[5] == 0);
    CHECK(bytes[6] == 64);  // record_size u32 LE
    CHECK(bytes[10] == 32);  // records_per_block
    CHECK(bytes[14] == 1);  // block_count u64 LE
    // First sealed block starts at offset 38 with the little-endian file id.
    CHECK(bytes[38] == 0x88);
    CHECK(bytes[45] == 0x11);
}

TEST_CASE("reopen restores meta and contents") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(24, 3);
    auto path = dir / "persist.smr";
    SealedBlock original = make_sealed(meta, 5, 0, 0x5A);
    {
        BlockFile file = BlockFile::create(path, meta);
        file.write_block(0, original);
    }
    BlockFile reopened = BlockFile::open(path);
    CHECK(reopened.meta() == meta);
    CHECK(reopened.block_count() == 1);
    CHECK(reopened.read_block(0).ciphertext == original.ciphertext);
}

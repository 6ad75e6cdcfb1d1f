#include <doctest.h>

#include <random>

#include "sgxmr/enclave.hpp"
#include "sgxmr/oblivious.hpp"
#include "testutil.hpp"

using namespace sgxmr;
using namespace sgxmr::test;

TEST_CASE("sealing is randomized, unsealing deterministic") {
    auto meta = BlockFileMeta::exact(32, 4);
    PlainBlock plain = PlainBlock::blank(1, 0, meta);
    plain.payload[5] = 42;
    SealedBlock s1 = seal_block(plain, test_key());
    SealedBlock s2 = seal_block(plain, test_key());
    CHECK(s1.ciphertext != s2.ciphertext);
    CHECK(s1.header.nonce != s2.header.nonce);

    PlainBlock u1 = unseal_block(s1, 1, 0, test_key(), meta);
    PlainBlock u2 = unseal_block(s2, 1, 0, test_key(), meta);
    CHECK(u1.payload == plain.payload);
    CHECK(u2.payload == plain.payload);
}

TEST_CASE("sealed size is constant across random payloads") {
    auto meta = BlockFileMeta::exact(48, 7);
    std::mt19937_64 rng(3);
    size_t expect = kBlockOverhead + meta.payload_size;
    for (int i = 0; i < 100; ++i) {
        PlainBlock plain = PlainBlock::blank(2, i, meta);
        for (auto& b : plain.payload) b = static_cast<uint8_t>(rng());
        CHECK(seal_block(plain, test_key()).serialized_size() == expect);
    }
}

TEST_CASE("nonces carry a monotone counter") {
    auto meta = BlockFileMeta::exact(32, 2);
    PlainBlock plain = PlainBlock::blank(1, 0, meta);
    uint64_t prev = nonce_counter(seal_block(plain, test_key()).header.nonce);
    for (int i = 0; i < 50; ++i) {
        uint64_t next = nonce_counter(seal_block(plain, test_key()).header.nonce);
        CHECK(next > prev);
        prev = next;
    }
}

TEST_CASE("tamper detection distinguishes the three attacks") {
    auto meta = BlockFileMeta::exact(32, 4);
    PlainBlock plain = PlainBlock::blank(1, 3, meta);
    SealedBlock sealed = seal_block(plain, test_key());

    SUBCASE("bit flip in ciphertext") {
        sealed.ciphertext[7] ^= 0x01;
        CHECK_THROWS_WITH_AS(unseal_block(sealed, 1, 3, test_key(), meta),
                             "authentication tag verification failed",
                             IntegrityError);
        try {
            unseal_block(sealed, 1, 3, test_key(), meta);
        } catch (const IntegrityError& e) {
            CHECK(e.kind() == IntegrityError::Kind::tag_mismatch);
        }
    }

    SUBCASE("block presented at the wrong position") {
        try {
            unseal_block(sealed, 1, 5, test_key(), meta);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(e.kind() == IntegrityError::Kind::block_id_mismatch);
        }
    }

    SUBCASE("block from another file") {
        try {
            unseal_block(sealed, 2, 3, test_key(), meta);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(e.kind() == IntegrityError::Kind::file_id_mismatch);
        }
    }

    SUBCASE("rewritten cleartext header still fails the tag") {
        sealed.header.block_id = 5;
        try {
            unseal_block(sealed, 1, 5, test_key(), meta);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(e.kind() == IntegrityError::Kind::tag_mismatch);
        }
    }
}

TEST_CASE("buffer capacity and LRU eviction") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(32, 4);
    BlockFile file = make_record_file(dir / "f.smr", meta, 1,
                                      {0, 1, 2, 3, 4, 5, 6, 7}, 6, test_key());
    FileBinding binding{&file, 1};

    SUBCASE("loading capacity+1 distinct blocks evicts exactly once") {
        EnclaveBuffer buffer(test_key(), 4);
        Trace trace = capture([&] {
            for (uint64_t i = 0; i < 5; ++i) buffer.load(binding, i);
        });
        CHECK(buffer.eviction_count() == 1);
        CHECK(buffer.resident_count() == 4);
        uint64_t untrusted_writes = 0;
        for (const auto& ev : trace.events)
            if (ev.region == Region::untrusted && ev.op == AccessOp::write)
                untrusted_writes++;
        CHECK(untrusted_writes == 1);
        // Block 0 was least recently used, so it went out first.
        CHECK(!buffer.is_resident(binding, 0));
        CHECK(buffer.is_resident(binding, 4));
    }

    SUBCASE("already-resident load touches no untrusted storage") {
        EnclaveBuffer buffer(test_key(), 4);
        buffer.load(binding, 2);
        Trace trace = capture([&] { buffer.load(binding, 2); });
        for (const auto& ev : trace.events)
            CHECK(ev.region != Region::untrusted);
    }

    SUBCASE("resident count never exceeds capacity") {
        EnclaveBuffer buffer(test_key(), 3);
        for (uint64_t i = 0; i < 6; ++i) {
            buffer.load(binding, i % file.block_count());
            CHECK(buffer.resident_count() <= 3);
        }
    }
}

TEST_CASE("a capacity-2 buffer fits one block compare-exchange") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(32, 4);
    BlockFile in = make_record_file(dir / "in.smr", meta, 1,
                                    {7, 3, 5, 1, 8, 2, 6, 4}, 2, test_key());
    BlockFile out = BlockFile::create(dir / "out.smr", meta);
    EnclaveBuffer buffer(test_key(), 2);
    bitonic_sort_blocks(FileBinding{&in, 1}, FileBinding{&out, 2}, buffer);
    CHECK(buffer.eviction_count() == 0);
    CHECK(out.block_count() == 2);
}

TEST_CASE("touch_record contracts") {
    auto meta = BlockFileMeta::exact(32, 4);
    PlainBlock block = PlainBlock::blank(1, 0, meta);

    SUBCASE("record index out of range") {
        CHECK_THROWS_AS(block.touch(4, AccessOp::read), std::out_of_range);
    }

    SUBCASE("o_swap touches both slots regardless of condition") {
        for (bool cond : {true, false}) {
            Trace trace = capture([&] {
                o_swap(cond, block.slot(0), block.slot(1));
            });
            REQUIRE(trace.events.size() == 4);
            CHECK(trace.events[0].op == AccessOp::read);
            CHECK(trace.events[1].op == AccessOp::read);
            CHECK(trace.events[2].op == AccessOp::write);
            CHECK(trace.events[3].op == AccessOp::write);
            CHECK(trace.events[0].record_index == 0);
            CHECK(trace.events[1].record_index == 1);
        }
    }

    SUBCASE("plain branchy swap with a false condition writes nothing") {
        Trace trace = capture([&] {
            plain_swap_if(false, block.slot(0), block.slot(1));
        });
        REQUIRE(trace.events.size() == 2);
        CHECK(trace.events[0].op == AccessOp::read);
        CHECK(trace.events[1].op == AccessOp::read);
    }

    SUBCASE("sequential block scan emits ascending reads") {
        Trace trace = capture([&] {
            for (uint32_t r = 0; r < meta.records_per_block; ++r)
                block.touch(r, AccessOp::read);
        });
        REQUIRE(trace.events.size() == meta.records_per_block);
        for (uint32_t r = 0; r < meta.records_per_block; ++r) {
            CHECK(trace.events[r].record_index == r);
            CHECK(trace.events[r].granularity == Granularity::record);
            CHECK(trace.events[r].region == Region::enclave);
        }
    }
}

TEST_CASE("buffer load propagates integrity errors") {
    TempDir dir;
    auto meta = BlockFileMeta::exact(32, 4);
    BlockFile file = make_record_file(dir / "f.smr", meta, 1, {0, 1, 2, 3}, 2,
                                      test_key());
    EnclaveBuffer buffer(test_key(), 2);
    FileBinding wrong_file{&file, 9};
    CHECK_THROWS_AS(buffer.load(wrong_file, 0), IntegrityError);
}

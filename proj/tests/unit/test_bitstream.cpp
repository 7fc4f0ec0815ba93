// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "support.hpp"
#include "vfpga/bitstream.hpp"

using namespace vfpga;
using vfpga::test::TestRng;

namespace {

/// Independent CRC oracle: bit-by-bit, no table.
uint32_t crc32_bitwise(std::span<const std::byte> data) {
    uint32_t crc = 0xFFFFFFFFu;
    for (std::byte b : data) {
        crc ^= static_cast<uint32_t>(b);
        for (int i = 0; i < 8; ++i)
            crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

BitstreamImage random_image(TestRng& rng) {
    BitstreamImage image;
    image.region_id = static_cast<uint16_t>(rng.below(4));
    for (uint64_t i = rng.below(12); i > 0; --i)
        image.compatible.push_back(static_cast<char>('a' + rng.below(26)));

    // Lay the register windows out with gaps so they never overlap.
    uint64_t cursor = 0x80000000 + rng.below(0x1000) * 0x1000;
    for (uint64_t i = rng.below(5); i > 0; --i) {
        DeviceRecord rec;
        rec.name = "dev" + std::to_string(i);
        for (uint64_t j = rng.below(8); j > 0; --j)
            rec.name.push_back(static_cast<char>('a' + rng.below(26)));
        rec.dev_type = static_cast<DeviceType>(rng.below(3));
        rec.reg_base = cursor;
        rec.reg_size = (rng.below(16) + 1) * 0x1000;
        cursor += rec.reg_size + rng.below(4) * 0x1000;
        if (rng.chance(0.7))
            rec.irq_line = static_cast<uint16_t>(rng.below(32));
        image.records.push_back(std::move(rec));
    }

    image.payload.resize(rng.below(2048));
    for (std::byte& b : image.payload)
        b = std::byte{static_cast<uint8_t>(rng.below(256))};
    return image;
}

} // namespace

TEST_CASE("crc32 matches the reference vector and the bitwise oracle") {
    const char* check = "123456789";
    auto bytes = std::as_bytes(std::span(check, 9));
    CHECK(crc32_ieee(bytes) == 0xCBF43926u);
    CHECK(crc32_bitwise(bytes) == 0xCBF43926u);

    TestRng rng(42);
    for (int i = 0; i < 50; ++i) {
        std::vector<std::byte> data(rng.below(300));
        for (std::byte& b : data)
            b = std::byte{static_cast<uint8_t>(rng.below(256))};
        CHECK(crc32_ieee(data) == crc32_bitwise(data));
    }
}

TEST_CASE("the golden CDMA image round-trips") {
    BitstreamImage image = vfpga::test::golden_cdma_image();
    auto encoded = encode_image(image);
    BitstreamImage decoded = decode_image(encoded);
    CHECK(decoded == image);
    CHECK(decoded.records[0].reg_base == 0xA0000000);
    CHECK(decoded.records[0].irq_line == 4);

    // Layout spot checks: magic, then the version word, little-endian.
    CHECK(encoded[0] == std::byte{'V'});
    CHECK(encoded[1] == std::byte{'F'});
    CHECK(encoded[2] == std::byte{'P'});
    CHECK(encoded[3] == std::byte{'B'});
    CHECK(encoded[4] == std::byte{1});
    CHECK(encoded[5] == std::byte{0});
    size_t expected_size = 4 + 2 + 2 + 2 + image.compatible.size() + 2 +
                           BitstreamImage::kRecordBytes * image.records.size() + 4 +
                           image.payload.size() + 4;
    CHECK(encoded.size() == expected_size);

    // The stored checksum equals the oracle CRC of everything before it.
    uint32_t stored = static_cast<uint32_t>(encoded[encoded.size() - 4]) |
                      static_cast<uint32_t>(encoded[encoded.size() - 3]) << 8 |
                      static_cast<uint32_t>(encoded[encoded.size() - 2]) << 16 |
                      static_cast<uint32_t>(encoded[encoded.size() - 1]) << 24;
    CHECK(stored == crc32_bitwise(std::span(encoded).first(encoded.size() - 4)));
}

TEST_CASE("decode rejects tampered containers") {
    auto encoded = encode_image(vfpga::test::golden_cdma_image());

    SUBCASE("flipped first byte") {
        encoded[0] ^= std::byte{0xFF};
        CHECK_THROWS_WITH_AS(decode_image(encoded), doctest::Contains("BadMagic"), Error);
    }
    SUBCASE("flipped version") {
        encoded[4] ^= std::byte{0x40};
        CHECK_THROWS_WITH_AS(decode_image(encoded), doctest::Contains("BadVersion"), Error);
    }
    SUBCASE("flipped last payload byte") {
        encoded[encoded.size() - 5] ^= std::byte{0x01};
        CHECK_THROWS_WITH_AS(decode_image(encoded), doctest::Contains("BadChecksum"), Error);
    }
    SUBCASE("truncated buffer") {
        encoded.resize(encoded.size() - 9);
        CHECK_THROWS_WITH_AS(decode_image(encoded), doctest::Contains("Truncated"), Error);
    }
    SUBCASE("trailing garbage") {
        encoded.push_back(std::byte{0});
        CHECK_THROWS_AS(decode_image(encoded), Error);
    }
    SUBCASE("empty input") {
        CHECK_THROWS_AS(decode_image({}), Error);
    }
}

TEST_CASE("encode rejects invalid images") {
    BitstreamImage image = vfpga::test::golden_cdma_image();

    SUBCASE("overlapping register windows") {
        DeviceRecord clash = image.records[0];
        clash.name = "clash";
        clash.reg_base += 0x800; // inside cdma0's window
        image.records.push_back(clash);
        CHECK_THROWS_WITH_AS(encode_image(image), doctest::Contains("OverlappingRecords"),
                             Error);
    }
    SUBCASE("name too long") {
        image.records[0].name.assign(40, 'x');
        CHECK_THROWS_AS(encode_image(image), Error);
    }
    SUBCASE("zero-sized window") {
        image.records[0].reg_size = 0;
        CHECK_THROWS_AS(encode_image(image), Error);
    }
    SUBCASE("unknown device type") {
        image.records[0].dev_type = static_cast<DeviceType>(9);
        CHECK_THROWS_AS(encode_image(image), Error);
    }
}

TEST_CASE("property: decode(encode(x)) is the identity on random images") {
    TestRng rng(7);
    for (int i = 0; i < 1000; ++i) {
        BitstreamImage image = random_image(rng);
        CHECK(decode_image(encode_image(image)) == image);
    }
}

TEST_CASE("property: any single-byte corruption is detected") {
    TestRng rng(11);
    const std::set<Errc> detectable = {Errc::BadMagic, Errc::BadVersion, Errc::BadChecksum,
                                       Errc::Truncated};
    for (int i = 0; i < 300; ++i) {
        BitstreamImage image = random_image(rng);
        auto encoded = encode_image(image);
        size_t pos = rng.below(encoded.size());
        std::byte flip{static_cast<uint8_t>(rng.in(1, 255))};
        encoded[pos] ^= flip;
        try {
            decode_image(encoded);
            FAIL("corruption at byte ", pos, " went undetected");
        } catch (const Error& e) {
            CHECK(detectable.count(e.code()) == 1);
        }
    }
}

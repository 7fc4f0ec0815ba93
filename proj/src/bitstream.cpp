// SPDX-License-Identifier: Apache-2.0
#include "vfpga/bitstream.hpp"

#include <algorithm>
#include <cstring>

namespace vfpga {

const char* device_type_name(DeviceType type) noexcept {
    switch (type) {
    case DeviceType::None: return "none";
    case DeviceType::Cdma: return "cdma";
    case DeviceType::Gpio: return "gpio";
    }
    return "invalid";
}

uint32_t crc32_ieee(std::span<const std::byte> data) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();

    uint32_t crc = 0xFFFFFFFFu;
    for (std::byte b : data)
        crc = table[(crc ^ static_cast<uint32_t>(b)) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

class Writer {
public:
    void u8(uint8_t v) { out_.push_back(std::byte{v}); }
    void u16(uint16_t v) {
        u8(static_cast<uint8_t>(v));
        u8(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        u16(static_cast<uint16_t>(v));
        u16(static_cast<uint16_t>(v >> 16));
    }
    void u64(uint64_t v) {
        u32(static_cast<uint32_t>(v));
        u32(static_cast<uint32_t>(v >> 32));
    }
    void bytes(std::span<const std::byte> b) { out_.insert(out_.end(), b.begin(), b.end()); }

    std::vector<std::byte> take() { return std::move(out_); }

private:
    std::vector<std::byte> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::byte> data) : data_(data) {}

    uint8_t u8() { return static_cast<uint8_t>(take(1)[0]); }
    uint16_t u16() {
        auto b = take(2);
        return static_cast<uint16_t>(static_cast<uint8_t>(b[0]) |
                                     static_cast<uint8_t>(b[1]) << 8);
    }
    uint32_t u32() {
        uint32_t lo = u16();
        return lo | static_cast<uint32_t>(u16()) << 16;
    }
    uint64_t u64() {
        uint64_t lo = u32();
        return lo | static_cast<uint64_t>(u32()) << 32;
    }
    std::span<const std::byte> take(size_t n) {
        if (remaining() < n)
            throw Error(Errc::Truncated, "need " + std::to_string(n) + " bytes, have " +
                                             std::to_string(remaining()));
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    size_t pos() const { return pos_; }
    size_t remaining() const { return data_.size() - pos_; }

private:
    std::span<const std::byte> data_;
    size_t pos_ = 0;
};

void validate_record(const DeviceRecord& rec) {
    if (rec.name.empty() || rec.name.size() > BitstreamImage::kNameFieldBytes - 1)
        throw Error(Errc::BadRecord, "record name length " + std::to_string(rec.name.size()));
    if (rec.name.find('\0') != std::string::npos)
        throw Error(Errc::BadRecord, "record name contains NUL");
    switch (rec.dev_type) {
    case DeviceType::None:
    case DeviceType::Cdma:
    case DeviceType::Gpio:
        break;
    default:
        throw Error(Errc::BadRecord, "device type " +
                                         std::to_string(static_cast<unsigned>(rec.dev_type)));
    }
    if (rec.reg_size == 0)
        throw Error(Errc::BadRecord, "zero reg size in record '" + rec.name + "'");
    if (rec.reg_base + rec.reg_size < rec.reg_base)
        throw Error(Errc::BadRecord, "reg window wraps in record '" + rec.name + "'");
    if (rec.irq_line && *rec.irq_line > 0x7FFF)
        throw Error(Errc::BadRecord, "irq line " + std::to_string(*rec.irq_line));
}

} // namespace

void validate_image(const BitstreamImage& image) {
    if (image.compatible.size() > 0xFFFF)
        throw Error(Errc::BadRecord, "compatible string too long");
    if (image.records.size() > 0xFFFF)
        throw Error(Errc::BadRecord, "too many records");
    if (image.payload.size() > 0xFFFFFFFFull)
        throw Error(Errc::BadRecord, "payload too long");

    for (const DeviceRecord& rec : image.records)
        validate_record(rec);

    // Register windows within one image must not overlap.
    std::vector<const DeviceRecord*> sorted;
    sorted.reserve(image.records.size());
    for (const DeviceRecord& rec : image.records)
        sorted.push_back(&rec);
    std::sort(sorted.begin(), sorted.end(),
              [](auto* a, auto* b) { return a->reg_base < b->reg_base; });
    for (size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i - 1]->reg_base + sorted[i - 1]->reg_size > sorted[i]->reg_base)
            throw Error(Errc::OverlappingRecords, "records '" + sorted[i - 1]->name + "' and '" +
                                                      sorted[i]->name + "'");
    }
}

std::vector<std::byte> encode_image(const BitstreamImage& image) {
    validate_image(image);

    Writer w;
    w.bytes(BitstreamImage::kMagic);
    w.u16(BitstreamImage::kVersion);
    w.u16(image.region_id);
    w.u16(static_cast<uint16_t>(image.compatible.size()));
    w.bytes(std::as_bytes(std::span(image.compatible.data(), image.compatible.size())));
    w.u16(static_cast<uint16_t>(image.records.size()));
    for (const DeviceRecord& rec : image.records) {
        std::array<std::byte, BitstreamImage::kNameFieldBytes> name{};
        std::memcpy(name.data(), rec.name.data(), rec.name.size());
        w.bytes(name);
        w.u8(static_cast<uint8_t>(rec.dev_type));
        w.u8(0); // pad
        w.u16(rec.irq_line ? static_cast<uint16_t>(*rec.irq_line) : static_cast<uint16_t>(-1));
        w.u64(rec.reg_base);
        w.u64(rec.reg_size);
    }
    w.u32(static_cast<uint32_t>(image.payload.size()));
    w.bytes(image.payload);

    std::vector<std::byte> body = w.take();
    uint32_t crc = crc32_ieee(body);
    Writer tail;
    tail.u32(crc);
    auto crc_bytes = tail.take();
    body.insert(body.end(), crc_bytes.begin(), crc_bytes.end());
    return body;
}

BitstreamImage decode_image(std::span<const std::byte> bytes) {
    Reader r(bytes);

    auto magic = r.take(4);
    if (!std::equal(magic.begin(), magic.end(), BitstreamImage::kMagic.begin()))
        throw Error(Errc::BadMagic, "not a firmware container");
    uint16_t version = r.u16();
    if (version != BitstreamImage::kVersion)
        throw Error(Errc::BadVersion, "version " + std::to_string(version));

    BitstreamImage image;
    image.region_id = r.u16();
    uint16_t compat_len = r.u16();
    auto compat = r.take(compat_len);
    image.compatible.assign(reinterpret_cast<const char*>(compat.data()), compat.size());

    uint16_t rec_count = r.u16();
    image.records.reserve(rec_count);
    for (uint16_t i = 0; i < rec_count; ++i) {
        DeviceRecord rec;
        auto name = r.take(BitstreamImage::kNameFieldBytes);
        size_t len = 0;
        while (len < name.size() && name[len] != std::byte{0})
            ++len;
        rec.name.assign(reinterpret_cast<const char*>(name.data()), len);
        rec.dev_type = static_cast<DeviceType>(r.u8());
        r.u8(); // pad
        int16_t irq = static_cast<int16_t>(r.u16());
        if (irq >= 0)
            rec.irq_line = static_cast<uint16_t>(irq);
        rec.reg_base = r.u64();
        rec.reg_size = r.u64();
        image.records.push_back(std::move(rec));
    }

    uint32_t payload_len = r.u32();
    auto payload = r.take(payload_len);
    image.payload.assign(payload.begin(), payload.end());

    size_t body_len = r.pos();
    uint32_t stored_crc = r.u32();
    if (r.remaining() != 0)
        throw Error(Errc::Truncated,
                    std::to_string(r.remaining()) + " trailing bytes after checksum");
    uint32_t computed = crc32_ieee(bytes.first(body_len));
    if (computed != stored_crc)
        throw Error(Errc::BadChecksum, "stored " + std::to_string(stored_crc) + ", computed " +
                                           std::to_string(computed));

    validate_image(image);
    return image;
}

} // namespace vfpga

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfpga/errors.hpp"

namespace vfpga {

enum class DeviceType : uint8_t {
    None = 0,
    Cdma = 1,
    Gpio = 2,
};

const char* device_type_name(DeviceType type) noexcept;

/// One device the firmware instantiates in the fabric: a register window and
/// an optional interrupt line.
struct DeviceRecord {
    std::string name;                  // <= 31 bytes
    DeviceType dev_type = DeviceType::None;
    uint64_t reg_base = 0;
    uint64_t reg_size = 0;             // > 0
    std::optional<uint16_t> irq_line;  // encoded as i16, -1 = none

    bool operator==(const DeviceRecord&) const = default;
};

/// Firmware container programmed into a fabric region. The payload is opaque
/// configuration data; the simulation instantiates devices from the records.
struct BitstreamImage {
    static constexpr std::array<std::byte, 4> kMagic = {std::byte{'V'}, std::byte{'F'},
                                                        std::byte{'P'}, std::byte{'B'}};
    static constexpr uint16_t kVersion = 1;
    static constexpr size_t kNameFieldBytes = 32;
    static constexpr size_t kRecordBytes = kNameFieldBytes + 1 + 1 + 2 + 8 + 8;

    uint16_t region_id = 0;
    std::string compatible;
    std::vector<DeviceRecord> records;
    std::vector<std::byte> payload;

    bool operator==(const BitstreamImage&) const = default;
};

/// CRC-32, reflected polynomial 0xEDB88320, init/xorout 0xFFFFFFFF.
uint32_t crc32_ieee(std::span<const std::byte> data);

/// Throws if `image` violates a container invariant (record name length,
/// device type, zero-sized or overlapping register windows).
void validate_image(const BitstreamImage& image);

/// Serializes to the fixed little-endian container layout.
std::vector<std::byte> encode_image(const BitstreamImage& image);

/// Parses and fully validates an encoded image. The whole buffer must be
/// consumed; surplus bytes are rejected the same way missing ones are.
BitstreamImage decode_image(std::span<const std::byte> bytes);

} // namespace vfpga

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vfpga/errors.hpp"

namespace vfpga {

/// Flat simulated guest RAM addressed by guest-physical addresses in
/// [base, base + size). All multi-byte accessors are little-endian and every
/// access is bounds-checked. Read/write call counters allow tests to account
/// for the exact number of memory copies a protocol performs.
class GuestMemory {
public:
    GuestMemory(uint64_t base, size_t size);

    GuestMemory(const GuestMemory&) = delete;
    GuestMemory& operator=(const GuestMemory&) = delete;

    uint64_t base() const noexcept { return base_; }
    uint64_t size() const noexcept { return bytes_.size(); }
    uint64_t end() const noexcept { return base_ + bytes_.size(); }

    bool contains(uint64_t addr, uint64_t len) const noexcept;

    void read(uint64_t addr, std::span<std::byte> out) const;
    void write(uint64_t addr, std::span<const std::byte> in);

    uint32_t read_u32(uint64_t addr) const;
    void write_u32(uint64_t addr, uint32_t value);

    /// Uninstrumented raw window, for bulk DMA-style access.
    std::span<const std::byte> view(uint64_t addr, size_t len) const;
    std::span<std::byte> view(uint64_t addr, size_t len);

    uint64_t read_ops() const noexcept { return reads_.load(std::memory_order_relaxed); }
    uint64_t write_ops() const noexcept { return writes_.load(std::memory_order_relaxed); }
    void reset_counters() noexcept;

private:
    size_t offset_of(uint64_t addr, uint64_t len) const;

    uint64_t base_;
    std::vector<std::byte> bytes_;
    mutable std::atomic<uint64_t> reads_{0};
    std::atomic<uint64_t> writes_{0};
};

} // namespace vfpga

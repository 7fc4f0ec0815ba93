// SPDX-License-Identifier: Apache-2.0
#include "vfpga/guest_memory.hpp"

#include <cstring>

namespace vfpga {

GuestMemory::GuestMemory(uint64_t base, size_t size) : base_(base), bytes_(size) {
    if (size == 0)
        throw Error(Errc::InvalidArgument, "guest memory size must be nonzero");
    if (base + size < base)
        throw Error(Errc::InvalidArgument, "guest memory range wraps the address space");
}

bool GuestMemory::contains(uint64_t addr, uint64_t len) const noexcept {
    if (addr < base_ || len > bytes_.size())
        return false;
    uint64_t off = addr - base_;
    return off <= bytes_.size() - len;
}

size_t GuestMemory::offset_of(uint64_t addr, uint64_t len) const {
    if (!contains(addr, len))
        throw Error(Errc::RegionOutOfBounds,
                    "access at 0x" + std::to_string(addr) + " len " + std::to_string(len));
    return static_cast<size_t>(addr - base_);
}

void GuestMemory::read(uint64_t addr, std::span<std::byte> out) const {
    size_t off = offset_of(addr, out.size());
    std::memcpy(out.data(), bytes_.data() + off, out.size());
    reads_.fetch_add(1, std::memory_order_relaxed);
}

void GuestMemory::write(uint64_t addr, std::span<const std::byte> in) {
    size_t off = offset_of(addr, in.size());
    std::memcpy(bytes_.data() + off, in.data(), in.size());
    writes_.fetch_add(1, std::memory_order_relaxed);
}

uint32_t GuestMemory::read_u32(uint64_t addr) const {
    size_t off = offset_of(addr, 4);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + off);
    reads_.fetch_add(1, std::memory_order_relaxed);
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

void GuestMemory::write_u32(uint64_t addr, uint32_t value) {
    size_t off = offset_of(addr, 4);
    auto* p = reinterpret_cast<unsigned char*>(bytes_.data() + off);
    p[0] = static_cast<unsigned char>(value);
    p[1] = static_cast<unsigned char>(value >> 8);
    p[2] = static_cast<unsigned char>(value >> 16);
    p[3] = static_cast<unsigned char>(value >> 24);
    writes_.fetch_add(1, std::memory_order_relaxed);
}

std::span<const std::byte> GuestMemory::view(uint64_t addr, size_t len) const {
    size_t off = offset_of(addr, len);
    return {bytes_.data() + off, len};
}

std::span<std::byte> GuestMemory::view(uint64_t addr, size_t len) {
    size_t off = offset_of(addr, len);
    return {bytes_.data() + off, len};
}

void GuestMemory::reset_counters() noexcept {
    reads_.store(0, std::memory_order_relaxed);
    writes_.store(0, std::memory_order_relaxed);
}

} // namespace vfpga

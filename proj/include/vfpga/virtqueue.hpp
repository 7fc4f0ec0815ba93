// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vfpga/guest_memory.hpp"

namespace vfpga {

/// Buffer region a driver exposes to the device. `device_writable` regions
/// are filled by the device; the rest are device-read-only.
struct BufferRegion {
    uint64_t addr = 0;
    uint32_t len = 0;
    bool device_writable = false;
};

struct VirtqDescriptor {
    static constexpr uint16_t kFlagNext = 0x1;
    static constexpr uint16_t kFlagDeviceWritable = 0x2;
    static constexpr uint16_t kNoNext = 0xFFFF;

    uint64_t addr = 0;
    uint32_t len = 0;
    uint16_t flags = 0;
    uint16_t next = kNoNext;

    bool has_next() const noexcept { return flags & kFlagNext; }
    bool device_writable() const noexcept { return flags & kFlagDeviceWritable; }
};

struct ChainSegment {
    uint64_t addr = 0;
    uint32_t len = 0;
    bool device_writable = false;
};

/// A descriptor chain the device popped from the available ring.
struct PoppedChain {
    uint16_t head = 0;
    std::vector<ChainSegment> segments;
};

struct UsedElem {
    uint16_t head = 0;
    uint32_t written_len = 0;
};

/// Split virtqueue: descriptor table + available ring + used ring, with
/// free-running 16-bit indices. Safe for exactly one driver-side thread and
/// one device-side thread operating concurrently; the free-running indices
/// carry the release/acquire edges between the two sides.
class Virtqueue {
public:
    static constexpr uint16_t kMinSize = 2;
    static constexpr uint16_t kMaxSize = 32768;

    Virtqueue(uint16_t size, GuestMemory& mem);

    Virtqueue(const Virtqueue&) = delete;
    Virtqueue& operator=(const Virtqueue&) = delete;

    uint16_t size() const noexcept { return size_; }
    GuestMemory& memory() noexcept { return mem_; }

    // --- driver side ---

    /// Links `regions` into a descriptor chain and publishes its head on the
    /// available ring. Returns the head descriptor index.
    uint16_t driver_add_buffer(std::span<const BufferRegion> regions);

    /// Reaps the next completion in device push order, recycling its chain.
    std::optional<UsedElem> driver_pop_used();

    uint16_t free_descriptors() const noexcept { return num_free_; }

    // --- device side ---

    /// Takes the next available chain in driver submission order. Does not
    /// mark it used; pair with device_push_used.
    std::optional<PoppedChain> device_pop();

    void device_push_used(uint16_t head, uint32_t written_len);

    /// Number of chains the driver has made available and the device has not
    /// yet popped.
    uint16_t device_pending() const noexcept;

    // --- introspection / fault injection ---

    uint16_t avail_idx() const noexcept { return avail_idx_.load(std::memory_order_acquire); }
    uint16_t used_idx() const noexcept { return used_idx_.load(std::memory_order_acquire); }
    const VirtqDescriptor& descriptor(uint16_t index) const;

    /// Overwrites a descriptor table entry. Test hook for exercising the
    /// corrupted-ring paths; never used by the protocol itself.
    void poke_descriptor(uint16_t index, const VirtqDescriptor& desc);

    /// Throws if a ring invariant is violated.
    void check_invariants() const;

private:
    uint16_t alloc_descriptor();
    void free_chain(uint16_t head);

    GuestMemory& mem_;
    uint16_t size_;

    std::vector<VirtqDescriptor> desc_table_;
    std::vector<uint16_t> avail_ring_;
    std::vector<UsedElem> used_ring_;

    std::atomic<uint16_t> avail_idx_{0};
    std::atomic<uint16_t> used_idx_{0};

    // driver-side state
    uint16_t free_head_ = VirtqDescriptor::kNoNext;
    uint16_t num_free_ = 0;
    uint16_t last_seen_used_ = 0;

    // device-side state
    uint16_t last_seen_avail_ = 0;
    std::vector<bool> outstanding_;
};

} // namespace vfpga

// SPDX-License-Identifier: Apache-2.0
#include "vfpga/virtqueue.hpp"

namespace vfpga {

namespace {

bool is_power_of_two(uint32_t v) {
    return v != 0 && (v & (v - 1)) == 0;
}

} // namespace

Virtqueue::Virtqueue(uint16_t size, GuestMemory& mem) : mem_(mem), size_(size) {
    if (size < kMinSize || size > kMaxSize)
        throw Error(Errc::SizeOutOfRange, "queue size " + std::to_string(size));
    if (!is_power_of_two(size))
        throw Error(Errc::SizeNotPowerOfTwo, "queue size " + std::to_string(size));

    desc_table_.resize(size_);
    avail_ring_.resize(size_);
    used_ring_.resize(size_);
    outstanding_.resize(size_, false);

    // Chain all descriptors onto the free list.
    for (uint16_t i = 0; i < size_; ++i)
        desc_table_[i].next = static_cast<uint16_t>(i + 1);
    desc_table_[size_ - 1].next = VirtqDescriptor::kNoNext;
    free_head_ = 0;
    num_free_ = size_;
}

uint16_t Virtqueue::alloc_descriptor() {
    uint16_t idx = free_head_;
    free_head_ = desc_table_[idx].next;
    --num_free_;
    return idx;
}

void Virtqueue::free_chain(uint16_t head) {
    uint16_t idx = head;
    for (;;) {
        VirtqDescriptor& d = desc_table_[idx];
        uint16_t next = d.has_next() ? d.next : VirtqDescriptor::kNoNext;
        d = VirtqDescriptor{};
        d.next = free_head_;
        free_head_ = idx;
        ++num_free_;
        if (next == VirtqDescriptor::kNoNext)
            break;
        idx = next;
    }
}

uint16_t Virtqueue::driver_add_buffer(std::span<const BufferRegion> regions) {
    if (regions.empty())
        throw Error(Errc::InvalidArgument, "empty buffer chain");
    if (regions.size() > num_free_)
        throw Error(Errc::QueueFull, "need " + std::to_string(regions.size()) +
                                         " descriptors, " + std::to_string(num_free_) + " free");
    for (const BufferRegion& r : regions) {
        if (r.len == 0 || !mem_.contains(r.addr, r.len))
            throw Error(Errc::RegionOutOfBounds, "buffer region at 0x" + std::to_string(r.addr));
    }

    uint16_t head = VirtqDescriptor::kNoNext;
    uint16_t prev = VirtqDescriptor::kNoNext;
    for (const BufferRegion& r : regions) {
        uint16_t idx = alloc_descriptor();
        VirtqDescriptor& d = desc_table_[idx];
        d.addr = r.addr;
        d.len = r.len;
        d.flags = r.device_writable ? VirtqDescriptor::kFlagDeviceWritable : uint16_t{0};
        d.next = VirtqDescriptor::kNoNext;
        if (prev == VirtqDescriptor::kNoNext) {
            head = idx;
        } else {
            desc_table_[prev].flags |= VirtqDescriptor::kFlagNext;
            desc_table_[prev].next = idx;
        }
        prev = idx;
    }

    uint16_t idx = avail_idx_.load(std::memory_order_relaxed);
    avail_ring_[idx % size_] = head;
    // Publish the descriptors and the ring slot to the device side.
    avail_idx_.store(static_cast<uint16_t>(idx + 1), std::memory_order_release);
    return head;
}

std::optional<PoppedChain> Virtqueue::device_pop() {
    uint16_t avail = avail_idx_.load(std::memory_order_acquire);
    if (last_seen_avail_ == avail)
        return std::nullopt;

    uint16_t head = avail_ring_[last_seen_avail_ % size_];
    if (head >= size_)
        throw Error(Errc::BadDescriptorChain, "head index " + std::to_string(head));

    PoppedChain chain;
    chain.head = head;
    uint16_t idx = head;
    for (;;) {
        if (chain.segments.size() == size_)
            throw Error(Errc::BadDescriptorChain, "chain longer than queue size (cycle?)");
        const VirtqDescriptor& d = desc_table_[idx];
        if (d.len == 0 || !mem_.contains(d.addr, d.len))
            throw Error(Errc::BadDescriptorChain,
                        "descriptor " + std::to_string(idx) + " out of bounds");
        chain.segments.push_back({d.addr, d.len, d.device_writable()});
        if (!d.has_next())
            break;
        if (d.next >= size_)
            throw Error(Errc::BadDescriptorChain, "next index " + std::to_string(d.next));
        idx = d.next;
    }

    outstanding_[head] = true;
    ++last_seen_avail_;
    return chain;
}

void Virtqueue::device_push_used(uint16_t head, uint32_t written_len) {
    if (head >= size_ || !outstanding_[head])
        throw Error(Errc::NotOutstanding, "head " + std::to_string(head));
    outstanding_[head] = false;

    uint16_t idx = used_idx_.load(std::memory_order_relaxed);
    used_ring_[idx % size_] = {head, written_len};
    used_idx_.store(static_cast<uint16_t>(idx + 1), std::memory_order_release);
}

std::optional<UsedElem> Virtqueue::driver_pop_used() {
    uint16_t used = used_idx_.load(std::memory_order_acquire);
    if (last_seen_used_ == used)
        return std::nullopt;

    UsedElem elem = used_ring_[last_seen_used_ % size_];
    ++last_seen_used_;
    free_chain(elem.head);
    return elem;
}

uint16_t Virtqueue::device_pending() const noexcept {
    return static_cast<uint16_t>(avail_idx_.load(std::memory_order_acquire) - last_seen_avail_);
}

const VirtqDescriptor& Virtqueue::descriptor(uint16_t index) const {
    if (index >= size_)
        throw Error(Errc::InvalidArgument, "descriptor index " + std::to_string(index));
    return desc_table_[index];
}

void Virtqueue::poke_descriptor(uint16_t index, const VirtqDescriptor& desc) {
    if (index >= size_)
        throw Error(Errc::InvalidArgument, "descriptor index " + std::to_string(index));
    desc_table_[index] = desc;
}

void Virtqueue::check_invariants() const {
    uint16_t avail = avail_idx_.load(std::memory_order_acquire);
    uint16_t used = used_idx_.load(std::memory_order_acquire);
    uint16_t in_flight = static_cast<uint16_t>(avail - used);
    if (in_flight > size_)
        throw Error(Errc::InvalidState, "avail.idx - used.idx = " + std::to_string(in_flight) +
                                            " exceeds queue size");
    for (uint16_t i = 0; i < size_; ++i) {
        if (avail_ring_[i] >= size_ || used_ring_[i].head >= size_)
            throw Error(Errc::InvalidState, "ring entry out of range at slot " + std::to_string(i));
    }
    if (num_free_ > size_)
        throw Error(Errc::InvalidState, "free descriptor count exceeds queue size");
}

} // namespace vfpga

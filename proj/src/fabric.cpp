// SPDX-License-Identifier: Apache-2.0
#include "vfpga/fabric.hpp"

#include <cstring>

namespace vfpga {

const char* dma_mode_name(DmaMode mode) noexcept {
    return mode == DmaMode::Interrupt ? "interrupt" : "polled";
}

CdmaDevice::CdmaDevice(DeviceRecord record, GuestMemory& ddr)
    : FabricDevice(std::move(record)), ddr_(ddr) {}

namespace {

struct PaChunk {
    uint64_t pa = 0;
    uint64_t len = 0;
};

/// Resolves [iova, iova+len) into physically contiguous chunks, none
/// crossing a 4 KiB boundary. Bisects when a translation seam falls inside a
/// chunk. Returns false on the first untranslatable byte.
bool resolve_extent(const IommuContainer& container, uint64_t iova, uint64_t len,
                    std::vector<PaChunk>& out) {
    uint64_t off = 0;
    while (off < len) {
        uint64_t addr = iova + off;
        uint64_t page_rem = CdmaDevice::kPageBytes - (addr & (CdmaDevice::kPageBytes - 1));
        uint64_t chunk = std::min(len - off, page_rem);
        for (;;) {
            auto first = container.try_translate(addr);
            if (!first)
                return false;
            auto last = container.try_translate(addr + chunk - 1);
            if (last && *last == *first + chunk - 1) {
                out.push_back({*first, chunk});
                break;
            }
            if (chunk == 1)
                return false;
            // Seam inside the chunk: take the front half, retry the rest.
            uint64_t half = chunk / 2;
            auto half_last = container.try_translate(addr + half - 1);
            if (!half_last || *half_last != *first + half - 1) {
                chunk = half;
                continue;
            }
            out.push_back({*first, half});
            addr += half;
            chunk -= half;
        }
        off = addr + chunk - iova;
    }
    return true;
}

bool ranges_overlap(uint64_t a, uint64_t a_len, uint64_t b, uint64_t b_len) {
    return a < b + b_len && b < a + a_len;
}

} // namespace

DmaHandle CdmaDevice::submit(IommuContainer& container, DmaTransfer xfer, SimClock& clock) {
    if (busy_)
        throw Error(Errc::Busy, "transfer already in flight on '" + record().name + "'");
    if (xfer.len == 0 || xfer.len % 4 != 0)
        throw Error(Errc::InvalidTransfer, "length " + std::to_string(xfer.len) +
                                               " is not a positive multiple of 4");
    if (ranges_overlap(xfer.src_iova, xfer.len, xfer.dst_iova, xfer.len))
        throw Error(Errc::InvalidTransfer, "source and destination ranges overlap");

    DmaHandle handle;
    handle.xfer_ = xfer;

    // Resolve both ranges before any byte moves: either the whole transfer
    // translates, or the destination stays untouched.
    std::vector<PaChunk> src_chunks, dst_chunks;
    if (!resolve_extent(container, xfer.src_iova, xfer.len, src_chunks) ||
        !resolve_extent(container, xfer.dst_iova, xfer.len, dst_chunks)) {
        handle.xfer_.result = DmaStatus::Fault;
        handle.done_ = true;
        handle.completion_time_us_ = clock.now_us();
        return handle;
    }

    // Stage through a bounce buffer, then scatter to the destination.
    std::vector<std::byte> bounce(xfer.len);
    uint64_t off = 0;
    for (const PaChunk& c : src_chunks) {
        std::memcpy(bounce.data() + off, ddr_.view(c.pa, c.len).data(), c.len);
        off += c.len;
    }
    off = 0;
    for (const PaChunk& c : dst_chunks) {
        std::memcpy(ddr_.view(c.pa, c.len).data(), bounce.data() + off, c.len);
        off += c.len;
    }

    double cost = cost_fn_ ? cost_fn_(xfer.mode, xfer.len) : 0.0;
    if (cost < 0.0)
        throw Error(Errc::InvalidArgument, "negative transfer cost");
    busy_ = true;
    completion_time_us_ = clock.now_us() + cost;
    handle.completion_time_us_ = completion_time_us_;
    return handle;
}

DmaStatus CdmaDevice::wait(DmaHandle& handle, SimClock& clock) {
    if (handle.done_)
        return handle.xfer_.result;

    if (handle.xfer_.mode == DmaMode::Interrupt) {
        // Sleep until the completion interrupt.
        clock.advance_to_us(handle.completion_time_us_);
        busy_ = false;
        handle.xfer_.result = DmaStatus::Ok;
        handle.done_ = true;
        if (irq_handler_)
            irq_handler_(handle.xfer_);
    } else {
        // Spin on the busy flag; each poll costs simulated time.
        while (clock.now_us() < handle.completion_time_us_)
            clock.advance_us(poll_cost_us_);
        busy_ = false;
        handle.xfer_.result = DmaStatus::Ok;
        handle.done_ = true;
    }
    return handle.xfer_.result;
}

void FabricRegion::configure(const BitstreamImage& image) {
    if (image.region_id != region_id_)
        throw Error(Errc::RegionMismatch, "image targets region " +
                                              std::to_string(image.region_id) + ", this is " +
                                              std::to_string(region_id_));

    // Build the replacement device set first so a failure leaves the region
    // exactly as it was.
    std::vector<std::unique_ptr<FabricDevice>> fresh;
    for (const DeviceRecord& rec : image.records) {
        switch (rec.dev_type) {
        case DeviceType::None:
            break; // placeholder record, no device
        case DeviceType::Cdma:
            fresh.push_back(std::make_unique<CdmaDevice>(rec, *ddr_));
            break;
        case DeviceType::Gpio:
            fresh.push_back(std::make_unique<GpioDevice>(rec));
            break;
        default:
            throw Error(Errc::UnsupportedDeviceType,
                        "type " + std::to_string(static_cast<unsigned>(rec.dev_type)) +
                            " in record '" + rec.name + "'");
        }
    }

    devices_ = std::move(fresh);
    image_ = image;
}

std::vector<DeviceRecord> FabricRegion::live_records() const {
    std::vector<DeviceRecord> records;
    records.reserve(devices_.size());
    for (const auto& dev : devices_)
        records.push_back(dev->record());
    return records;
}

CdmaDevice* FabricRegion::find_cdma() noexcept {
    for (const auto& dev : devices_)
        if (dev->type() == DeviceType::Cdma)
            return static_cast<CdmaDevice*>(dev.get());
    return nullptr;
}

void enable_device(VfioDevice& dev, const FabricRegion& fabric, const DtNode& root) {
    const DtNode* node = root.find_path(dev.node_path());
    if (!node)
        throw Error(Errc::NodeNotFound, dev.node_path());
    if (!node->status_is("okay"))
        throw Error(Errc::StillDisabled, dev.node_path());

    const BasePropertyGuard& guard = dev.guard();
    if (guard.reg.empty())
        throw Error(Errc::MissingReg, dev.node_path());

    const DeviceRecord* match = nullptr;
    for (const auto& fabric_dev : fabric.devices()) {
        if (fabric_dev->record().reg_base == guard.reg[0][0]) {
            match = &fabric_dev->record();
            break;
        }
    }
    if (!match)
        throw Error(Errc::NotConfigured,
                    "no live fabric device at the guarded address for " + dev.node_path());

    bool reg_ok = guard.reg.size() == 1 && match->reg_base == guard.reg[0][0] &&
                  match->reg_size == guard.reg[0][1];
    bool irq_ok;
    if (match->irq_line)
        irq_ok = guard.interrupts.size() == 1 && guard.interrupts[0] == *match->irq_line;
    else
        irq_ok = guard.interrupts.empty();
    if (!reg_ok || !irq_ok)
        throw Error(Errc::GuardMismatch, "firmware record '" + match->name +
                                             "' disagrees with the frozen properties of " +
                                             dev.node_path());

    dev.mark_enabled();
}

} // namespace vfpga

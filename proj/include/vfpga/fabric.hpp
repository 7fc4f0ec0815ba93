// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "vfpga/bitstream.hpp"
#include "vfpga/guest_memory.hpp"
#include "vfpga/iommu.hpp"
#include "vfpga/sim_clock.hpp"

namespace vfpga {

enum class DmaMode {
    Interrupt = 0,
    Polled = 1,
};

const char* dma_mode_name(DmaMode mode) noexcept;

enum class DmaStatus {
    Pending,
    Ok,
    Fault,
};

struct DmaTransfer {
    uint64_t src_iova = 0;
    uint64_t dst_iova = 0;
    uint64_t len = 0; // multiple of 4 bytes; src/dst ranges must not overlap
    DmaMode mode = DmaMode::Interrupt;
    DmaStatus result = DmaStatus::Pending;
};

/// Live device instantiated in a fabric region from one firmware record.
class FabricDevice {
public:
    explicit FabricDevice(DeviceRecord record) : record_(std::move(record)) {}
    virtual ~FabricDevice() = default;

    const DeviceRecord& record() const noexcept { return record_; }
    DeviceType type() const noexcept { return record_.dev_type; }

private:
    DeviceRecord record_;
};

class GpioDevice final : public FabricDevice {
public:
    explicit GpioDevice(DeviceRecord record) : FabricDevice(std::move(record)) {}

    void set_pins(uint32_t value) noexcept { pins_ = value; }
    uint32_t pins() const noexcept { return pins_; }

private:
    uint32_t pins_ = 0;
};

/// Token for one submitted DMA transfer.
class DmaHandle {
public:
    const DmaTransfer& transfer() const noexcept { return xfer_; }
    double completion_time_us() const noexcept { return completion_time_us_; }
    bool done() const noexcept { return done_; }

private:
    friend class CdmaDevice;

    DmaTransfer xfer_{};
    double completion_time_us_ = 0.0;
    bool done_ = false;
};

/// Memory-to-memory copy engine. Transfers move real bytes between DDR
/// locations resolved through an IOMMU container, instantaneously in real
/// time but charged on the simulated clock via the installed cost model.
class CdmaDevice final : public FabricDevice {
public:
    using CostFn = std::function<double(DmaMode mode, uint64_t len_bytes)>;
    using CompletionFn = std::function<void(const DmaTransfer&)>;

    static constexpr uint64_t kPageBytes = 4096;
    static constexpr double kDefaultPollCostUs = 0.1;

    CdmaDevice(DeviceRecord record, GuestMemory& ddr);

    bool busy() const noexcept { return busy_; }

    void set_cost_model(CostFn fn) { cost_fn_ = std::move(fn); }
    void set_poll_cost_us(double us) { poll_cost_us_ = us; }
    void set_irq_handler(CompletionFn fn) { irq_handler_ = std::move(fn); }

    /// Programs a transfer. Every touched 4 KiB page of src and dst is
    /// translated up front; an unmapped page yields a FAULT result with the
    /// destination untouched. On success the copy is performed and the
    /// completion is scheduled at now + cost.
    DmaHandle submit(IommuContainer& container, DmaTransfer xfer, SimClock& clock);

    /// Completes a transfer. INTERRUPT mode sleeps to the completion time
    /// and fires the irq handler; POLLED mode spins on the busy flag, each
    /// poll costing simulated time.
    DmaStatus wait(DmaHandle& handle, SimClock& clock);

private:
    GuestMemory& ddr_;
    bool busy_ = false;
    double completion_time_us_ = 0.0;
    double poll_cost_us_ = kDefaultPollCostUs;
    CostFn cost_fn_;
    CompletionFn irq_handler_;
};

/// One reconfigurable region of the programmable logic. Configuring it from
/// an image replaces all live devices; a failed configuration leaves the
/// previous state untouched.
class FabricRegion {
public:
    FabricRegion(uint16_t region_id, GuestMemory& ddr)
        : region_id_(region_id), ddr_(&ddr) {}

    uint16_t region_id() const noexcept { return region_id_; }
    bool configured() const noexcept { return image_.has_value(); }
    const BitstreamImage* image() const noexcept { return image_ ? &*image_ : nullptr; }

    void configure(const BitstreamImage& image);

    std::span<const std::unique_ptr<FabricDevice>> devices() const noexcept {
        return devices_;
    }

    /// Records of the live (instantiated) devices, in image order.
    std::vector<DeviceRecord> live_records() const;

    CdmaDevice* find_cdma() noexcept;

private:
    uint16_t region_id_;
    GuestMemory* ddr_;
    std::optional<BitstreamImage> image_;
    std::vector<std::unique_ptr<FabricDevice>> devices_;
};

/// Flips a passthrough device to enabled after checking the full contract:
/// the tree node must be "okay" and the fabric must carry a live device
/// whose record matches the frozen guard exactly.
void enable_device(VfioDevice& dev, const FabricRegion& fabric, const DtNode& root);

} // namespace vfpga

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vfpga/fpga_manager.hpp"
#include "vfpga/sim_clock.hpp"
#include "vfpga/virtqueue.hpp"

namespace vfpga {

struct VfpgaDeviceConfig {
    uint32_t device_type_id = 0x1A; // placeholder id, outside the allocated set
    uint16_t filename_queue_size = 8;
    uint16_t status_queue_size = 8;
    uint32_t max_name_len = 256; // NUL included
};

/// Host-side device model. Services one filename request per kick: pops the
/// name, runs the manager, and pushes a 4-byte status reply. A malformed
/// request is answered with EINVAL instead of failing the device.
class VfpgaBackend {
public:
    VfpgaBackend(VfpgaDeviceConfig config, Virtqueue& filename_q, Virtqueue& status_q,
                 FpgaManager& mgr, GuestMemory& mem);

    /// Pops and services at most one request; returns the count (0 or 1).
    size_t service_once();

    uint64_t requests_serviced() const noexcept { return serviced_; }

private:
    VfpgaDeviceConfig config_;
    Virtqueue& filename_q_;
    Virtqueue& status_q_;
    FpgaManager& mgr_;
    GuestMemory& mem_;
    uint64_t serviced_ = 0;
};

/// Guest-side driver. Owns the two queues and a small buffer area in guest
/// memory; firmware_store() mirrors a sysfs write: it blocks until the
/// device answers, then logs one kernel-style line.
class VfpgaFrontend {
public:
    static constexpr double kDefaultTimeoutUs = 5e6; // 5 simulated seconds
    static constexpr uint64_t kBufferAreaBytes = 512;

    /// `buffer_base` names a kBufferAreaBytes region of `mem` the frontend
    /// may use for its request/reply buffers.
    VfpgaFrontend(VfpgaDeviceConfig config, GuestMemory& mem, SimClock& clock,
                  uint64_t buffer_base);

    Virtqueue& filename_queue() noexcept { return *filename_q_; }
    Virtqueue& status_queue() noexcept { return *status_q_; }

    /// Routes kicks to a backend serviced synchronously on this thread.
    void connect(VfpgaBackend& backend);
    /// Custom kick transport (tests).
    void set_kick(std::function<void()> kick) { kick_ = std::move(kick); }

    void set_timeout_us(double us) { timeout_us_ = us; }

    /// Writes the request, kicks the device, and blocks until the status
    /// reply lands. Appends one log line per completed request.
    ProgramStatus firmware_store(std::string_view name);

    const std::vector<std::string>& log() const noexcept { return log_; }

private:
    VfpgaDeviceConfig config_;
    GuestMemory& mem_;
    SimClock& clock_;
    std::unique_ptr<Virtqueue> filename_q_;
    std::unique_ptr<Virtqueue> status_q_;
    uint64_t filename_buf_;
    uint64_t status_buf_;
    bool status_posted_ = false;
    std::function<void()> kick_;
    double timeout_us_ = kDefaultTimeoutUs;
    std::vector<std::string> log_;
};

} // namespace vfpga

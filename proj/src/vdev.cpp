// SPDX-License-Identifier: Apache-2.0
#include "vfpga/vdev.hpp"

#include <array>
#include <cstring>

namespace vfpga {

VfpgaBackend::VfpgaBackend(VfpgaDeviceConfig config, Virtqueue& filename_q, Virtqueue& status_q,
                           FpgaManager& mgr, GuestMemory& mem)
    : config_(config), filename_q_(filename_q), status_q_(status_q), mgr_(mgr), mem_(mem) {
    if (&filename_q.memory() != &mem || &status_q.memory() != &mem)
        throw Error(Errc::InvalidArgument, "queues must share the device's guest memory");
}

size_t VfpgaBackend::service_once() {
    auto request = filename_q_.device_pop();
    if (!request)
        return 0;

    // Gather the request bytes; oversized requests are cut off and rejected
    // by the framing checks below.
    std::vector<std::byte> raw;
    for (const ChainSegment& seg : request->segments) {
        if (raw.size() >= config_.max_name_len + 1)
            break;
        size_t take = std::min<size_t>(seg.len, config_.max_name_len + 1 - raw.size());
        size_t old = raw.size();
        raw.resize(old + take);
        mem_.read(seg.addr, std::span(raw).subspan(old));
    }

    // Framing: NUL-terminated, no interior NUL, no path separators.
    std::string name;
    bool well_formed = !raw.empty() && raw.size() <= config_.max_name_len &&
                       raw.back() == std::byte{0};
    if (well_formed) {
        name.assign(reinterpret_cast<const char*>(raw.data()), raw.size() - 1);
        well_formed = !name.empty() && name.find('\0') == std::string::npos &&
                      name.find('/') == std::string::npos &&
                      name.find('\\') == std::string::npos;
    }

    ProgramStatus status =
        well_formed ? mgr_.program_firmware(name) : ProgramStatus::InvalidImage;

    filename_q_.device_push_used(request->head, 0);

    // Answer on the status queue if the driver posted a reply buffer.
    if (auto reply = status_q_.device_pop()) {
        for (const ChainSegment& seg : reply->segments) {
            if (seg.device_writable && seg.len >= 4) {
                mem_.write_u32(seg.addr, static_cast<uint32_t>(status));
                status_q_.device_push_used(reply->head, 4);
                ++serviced_;
                return 1;
            }
        }
        // No usable segment; complete it with nothing written.
        status_q_.device_push_used(reply->head, 0);
    }
    ++serviced_;
    return 1;
}

VfpgaFrontend::VfpgaFrontend(VfpgaDeviceConfig config, GuestMemory& mem, SimClock& clock,
                             uint64_t buffer_base)
    : config_(config), mem_(mem), clock_(clock) {
    if (!mem.contains(buffer_base, kBufferAreaBytes))
        throw Error(Errc::RegionOutOfBounds, "frontend buffer area");
    if (config_.max_name_len + 4 > kBufferAreaBytes)
        throw Error(Errc::InvalidArgument, "buffer area too small for max_name_len");

    filename_q_ = std::make_unique<Virtqueue>(config_.filename_queue_size, mem);
    status_q_ = std::make_unique<Virtqueue>(config_.status_queue_size, mem);
    filename_buf_ = buffer_base;
    status_buf_ = buffer_base + config_.max_name_len;

    // Pre-post one reply buffer so the device can always answer the first
    // request.
    status_q_->driver_add_buffer(
        std::array{BufferRegion{status_buf_, 4, /*device_writable=*/true}});
    status_posted_ = true;
}

void VfpgaFrontend::connect(VfpgaBackend& backend) {
    kick_ = [&backend] { backend.service_once(); };
}

ProgramStatus VfpgaFrontend::firmware_store(std::string_view name) {
    if (name.size() > config_.max_name_len - 1)
        throw Error(Errc::NameTooLong, std::to_string(name.size()) + " bytes");
    if (name.empty() || name.find('\0') != std::string_view::npos ||
        name.find('/') != std::string_view::npos || name.find('\\') != std::string_view::npos)
        throw Error(Errc::InvalidName, std::string(name));

    if (!status_posted_) {
        status_q_->driver_add_buffer(
            std::array{BufferRegion{status_buf_, 4, /*device_writable=*/true}});
        status_posted_ = true;
    }

    // One memory copy kernel-side: the request buffer.
    std::vector<std::byte> request(name.size() + 1);
    std::memcpy(request.data(), name.data(), name.size());
    request[name.size()] = std::byte{0};
    mem_.write(filename_buf_, request);

    filename_q_->driver_add_buffer(std::array{
        BufferRegion{filename_buf_, static_cast<uint32_t>(request.size()), false}});

    if (kick_)
        kick_();

    // Block until the reply lands; an unresponsive device times out on the
    // simulated clock.
    constexpr double kPollTickUs = 1000.0;
    double deadline = clock_.now_us() + timeout_us_;
    std::optional<UsedElem> reply;
    for (;;) {
        reply = status_q_->driver_pop_used();
        if (reply)
            break;
        if (clock_.now_us() >= deadline)
            throw Error(Errc::Timeout, "no status reply from the device");
        clock_.advance_us(kPollTickUs);
    }
    status_posted_ = false;
    filename_q_->driver_pop_used(); // reclaim the request chain

    ProgramStatus status = ProgramStatus::IoError;
    if (reply->written_len == 4)
        status = static_cast<ProgramStatus>(mem_.read_u32(status_buf_));

    log_.push_back("virtio_fpga fpga0: programming " + std::string(name) + ": " +
                   program_status_text(status));
    return status;
}

} // namespace vfpga

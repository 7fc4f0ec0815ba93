// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>

#include "vfpga/fabric.hpp"

namespace vfpga {

enum class ManagerState {
    Idle,
    WriteInit,
    Writing,
    Complete,
    Error,
};

const char* manager_state_name(ManagerState state) noexcept;

/// Status returned to the requester, errno-style. Wire form is a u32
/// little-endian word.
enum class ProgramStatus : uint32_t {
    Ok = 0,
    FileNotFound = 2,  // ENOENT
    IoError = 5,       // EIO
    InvalidImage = 22, // EINVAL
};

const char* program_status_name(ProgramStatus status) noexcept;

/// Short human-readable form for log lines: "OK" or "error <n> (<NAME>)".
std::string program_status_text(ProgramStatus status);

/// The vendor-driver operation set. The manager core drives these strictly
/// in the order init, write xN, complete; a false return aborts the request.
struct VendorDriverOps {
    std::function<bool(const BitstreamImage& image)> write_init;
    std::function<bool(std::span<const std::byte> chunk)> write;
    std::function<bool()> write_complete;
};

/// Vendor ops that accept everything; the behavioral work happens in the
/// fabric configuration step.
VendorDriverOps make_default_vendor_ops();

/// Host-side manager core: resolves firmware names against a directory,
/// validates the image, and runs the three-phase vendor sequence before
/// configuring the target fabric region. One request in flight at a time; a
/// failed request leaves the fabric untouched and the manager re-armed.
class FpgaManager {
public:
    static constexpr size_t kWriteChunkBytes = 4096;

    FpgaManager(std::string name, VendorDriverOps ops, std::filesystem::path firmware_dir,
                FabricRegion& fabric);

    const std::string& name() const noexcept { return name_; }
    ManagerState state() const noexcept { return state_; }
    const std::filesystem::path& firmware_dir() const noexcept { return firmware_dir_; }
    FabricRegion& fabric() noexcept { return fabric_; }

    /// Resolves `<firmware_dir>/<firmware_name>` and programs it. The name
    /// must be bare (no path separators).
    ProgramStatus program_firmware(std::string_view firmware_name);

    /// Programs from an in-memory encoded image.
    ProgramStatus program_buffer(std::span<const std::byte> bytes);

private:
    ProgramStatus run_request(std::span<const std::byte> bytes);
    ProgramStatus fail(ProgramStatus status);

    std::string name_;
    VendorDriverOps ops_;
    std::filesystem::path firmware_dir_;
    FabricRegion& fabric_;
    ManagerState state_ = ManagerState::Idle;
    bool in_flight_ = false;
};

} // namespace vfpga

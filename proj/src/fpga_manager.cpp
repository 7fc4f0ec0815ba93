// SPDX-License-Identifier: Apache-2.0
#include "vfpga/fpga_manager.hpp"

#include <fstream>

namespace vfpga {

const char* manager_state_name(ManagerState state) noexcept {
    switch (state) {
    case ManagerState::Idle: return "idle";
    case ManagerState::WriteInit: return "write_init";
    case ManagerState::Writing: return "writing";
    case ManagerState::Complete: return "complete";
    case ManagerState::Error: return "error";
    }
    return "invalid";
}

const char* program_status_name(ProgramStatus status) noexcept {
    switch (status) {
    case ProgramStatus::Ok: return "OK";
    case ProgramStatus::FileNotFound: return "ENOENT";
    case ProgramStatus::IoError: return "EIO";
    case ProgramStatus::InvalidImage: return "EINVAL";
    }
    return "invalid";
}

std::string program_status_text(ProgramStatus status) {
    if (status == ProgramStatus::Ok)
        return "OK";
    return "error " + std::to_string(static_cast<uint32_t>(status)) + " (" +
           program_status_name(status) + ")";
}

VendorDriverOps make_default_vendor_ops() {
    return {
        [](const BitstreamImage&) { return true; },
        [](std::span<const std::byte>) { return true; },
        [] { return true; },
    };
}

FpgaManager::FpgaManager(std::string name, VendorDriverOps ops,
                         std::filesystem::path firmware_dir, FabricRegion& fabric)
    : name_(std::move(name)), ops_(std::move(ops)), firmware_dir_(std::move(firmware_dir)),
      fabric_(fabric) {
    if (!std::filesystem::is_directory(firmware_dir_))
        throw Error(Errc::MissingFirmwareDir, firmware_dir_.string());
    if (!ops_.write_init || !ops_.write || !ops_.write_complete)
        throw Error(Errc::InvalidArgument, "vendor ops must all be set");
}

ProgramStatus FpgaManager::fail(ProgramStatus status) {
    state_ = ManagerState::Error;
    return status;
}

ProgramStatus FpgaManager::program_firmware(std::string_view firmware_name) {
    if (in_flight_)
        throw Error(Errc::RequestInFlight, "manager '" + name_ + "' is busy");
    in_flight_ = true;
    struct Release {
        bool& flag;
        ~Release() { flag = false; }
    } release{in_flight_};

    state_ = ManagerState::WriteInit;
    if (firmware_name.empty() ||
        firmware_name.find('/') != std::string_view::npos ||
        firmware_name.find('\\') != std::string_view::npos)
        return fail(ProgramStatus::InvalidImage);

    std::filesystem::path path = firmware_dir_ / firmware_name;
    std::ifstream file(path, std::ios::binary);
    if (!file)
        return fail(ProgramStatus::FileNotFound);
    std::vector<std::byte> bytes;
    char buf[4096];
    while (file.read(buf, sizeof buf) || file.gcount() > 0) {
        auto* p = reinterpret_cast<const std::byte*>(buf);
        bytes.insert(bytes.end(), p, p + file.gcount());
    }

    return run_request(bytes);
}

ProgramStatus FpgaManager::program_buffer(std::span<const std::byte> bytes) {
    if (in_flight_)
        throw Error(Errc::RequestInFlight, "manager '" + name_ + "' is busy");
    in_flight_ = true;
    struct Release {
        bool& flag;
        ~Release() { flag = false; }
    } release{in_flight_};

    state_ = ManagerState::WriteInit;
    return run_request(bytes);
}

ProgramStatus FpgaManager::run_request(std::span<const std::byte> bytes) {
    // Parse and validate before the vendor sequence so a malformed image
    // never reaches the hardware path.
    BitstreamImage image;
    try {
        image = decode_image(bytes);
    } catch (const Error&) {
        return fail(ProgramStatus::InvalidImage);
    }
    if (image.region_id != fabric_.region_id())
        return fail(ProgramStatus::InvalidImage);

    if (!ops_.write_init(image))
        return fail(ProgramStatus::IoError);

    state_ = ManagerState::Writing;
    for (size_t off = 0; off < bytes.size(); off += kWriteChunkBytes) {
        size_t chunk = std::min(kWriteChunkBytes, bytes.size() - off);
        if (!ops_.write(bytes.subspan(off, chunk)))
            return fail(ProgramStatus::IoError);
    }

    if (!ops_.write_complete())
        return fail(ProgramStatus::IoError);

    try {
        fabric_.configure(image);
    } catch (const Error&) {
        return fail(ProgramStatus::InvalidImage);
    }

    state_ = ManagerState::Complete;
    return ProgramStatus::Ok;
}

} // namespace vfpga

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vfpga {

// Error conditions raised across the simulator. Grouped by subsystem.
enum class Errc {
    // guest memory / virtqueue
    SizeNotPowerOfTwo,
    SizeOutOfRange,
    QueueFull,
    RegionOutOfBounds,
    BadDescriptorChain,
    NotOutstanding,
    // bitstream container
    BadMagic,
    BadVersion,
    BadChecksum,
    Truncated,
    OverlappingRecords,
    BadRecord,
    // fpga manager
    MissingFirmwareDir,
    RequestInFlight,
    // device tree
    SyntaxError,
    DuplicateNode,
    BadCell,
    MissingPluginMarker,
    RelativeTarget,
    TargetNotFound,
    GuardViolation,
    // iommu / vfio
    Overlap,
    OutsideDirectWindow,
    NotMapped,
    Fault,
    NodeNotFound,
    MissingReg,
    NotConfigured,
    GuardMismatch,
    StillDisabled,
    // fabric
    RegionMismatch,
    UnsupportedDeviceType,
    Busy,
    TranslationFault,
    InvalidTransfer,
    // paravirtual device
    NameTooLong,
    InvalidName,
    Timeout,
    // bench
    DegenerateFit,
    NonPositiveSolution,
    DeviceNotEnabled,
    VerificationFailed,
    // generic
    InvalidArgument,
    InvalidState,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Parse diagnostics carry a 1-based source position.
class ParseError : public Error {
public:
    ParseError(Errc code, const std::string& msg, int line, int column)
        : Error(code, msg + " (line " + std::to_string(line) + ", column " +
                          std::to_string(column) + ")"),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

} // namespace vfpga

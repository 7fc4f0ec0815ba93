// SPDX-License-Identifier: Apache-2.0
#include "vfpga/errors.hpp"

namespace vfpga {

const char* errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::SizeNotPowerOfTwo: return "SizeNotPowerOfTwo";
    case Errc::SizeOutOfRange: return "SizeOutOfRange";
    case Errc::QueueFull: return "QueueFull";
    case Errc::RegionOutOfBounds: return "RegionOutOfBounds";
    case Errc::BadDescriptorChain: return "BadDescriptorChain";
    case Errc::NotOutstanding: return "NotOutstanding";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadVersion: return "BadVersion";
    case Errc::BadChecksum: return "BadChecksum";
    case Errc::Truncated: return "Truncated";
    case Errc::OverlappingRecords: return "OverlappingRecords";
    case Errc::BadRecord: return "BadRecord";
    case Errc::MissingFirmwareDir: return "MissingFirmwareDir";
    case Errc::RequestInFlight: return "RequestInFlight";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::DuplicateNode: return "DuplicateNode";
    case Errc::BadCell: return "BadCell";
    case Errc::MissingPluginMarker: return "MissingPluginMarker";
    case Errc::RelativeTarget: return "RelativeTarget";
    case Errc::TargetNotFound: return "TargetNotFound";
    case Errc::GuardViolation: return "GuardViolation";
    case Errc::Overlap: return "Overlap";
    case Errc::OutsideDirectWindow: return "OutsideDirectWindow";
    case Errc::NotMapped: return "NotMapped";
    case Errc::Fault: return "Fault";
    case Errc::NodeNotFound: return "NodeNotFound";
    case Errc::MissingReg: return "MissingReg";
    case Errc::NotConfigured: return "NotConfigured";
    case Errc::GuardMismatch: return "GuardMismatch";
    case Errc::StillDisabled: return "StillDisabled";
    case Errc::RegionMismatch: return "RegionMismatch";
    case Errc::UnsupportedDeviceType: return "UnsupportedDeviceType";
    case Errc::Busy: return "Busy";
    case Errc::TranslationFault: return "TranslationFault";
    case Errc::InvalidTransfer: return "InvalidTransfer";
    case Errc::NameTooLong: return "NameTooLong";
    case Errc::InvalidName: return "InvalidName";
    case Errc::Timeout: return "Timeout";
    case Errc::DegenerateFit: return "DegenerateFit";
    case Errc::NonPositiveSolution: return "NonPositiveSolution";
    case Errc::DeviceNotEnabled: return "DeviceNotEnabled";
    case Errc::VerificationFailed: return "VerificationFailed";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidState: return "InvalidState";
    }
    return "UnknownError";
}

} // namespace vfpga

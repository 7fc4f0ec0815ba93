// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vfpga/bench.hpp"
#include "vfpga/vdev.hpp"

namespace vfpga {

/// Everything a run needs, loaded from a JSON scenario file. Relative paths
/// are resolved against the scenario file's directory and must exist.
struct Scenario {
    std::filesystem::path base_dts;
    std::filesystem::path overlay;
    std::filesystem::path firmware_dir;
    std::string firmware_name;
    BenchConfig bench;
    std::optional<std::filesystem::path> calibration; // nullopt = builtin
    uint64_t seed = TimeModel::kDefaultSeed;

    static Scenario load(const std::filesystem::path& json_file);

    /// The time model the scenario selects; the scenario seed always wins.
    TimeModel time_model() const;
};

/// The booted simulation: guest tree, passthrough candidates, the two IOMMU
/// containers, the fabric, the manager, and the paravirtual device pair.
class SystemState {
public:
    static constexpr uint64_t kRamBase = 0x40000000ull;
    static constexpr uint64_t kRamBytes = 8ull << 20;
    static constexpr uint16_t kFabricRegionId = 0;

    explicit SystemState(Scenario scenario);

    // Members hand out references to each other; the state stays put.
    SystemState(const SystemState&) = delete;
    SystemState& operator=(const SystemState&) = delete;

    const Scenario& scenario() const noexcept { return scenario_; }
    const DtNode& tree() const noexcept { return tree_; }
    const std::vector<VfioDevice>& devices() const noexcept { return devices_; }
    const std::vector<std::string>& guest_log() const noexcept { return frontend_->log(); }
    VfpgaFrontend& frontend() noexcept { return *frontend_; }
    FabricRegion& fabric() noexcept { return *fabric_; }
    SimClock& clock() noexcept { return clock_; }

    /// One line per passthrough candidate with its frozen properties.
    std::string boot_summary() const;

    /// Programs firmware through the guest frontend and returns the status
    /// the device reported.
    ProgramStatus program(const std::string& firmware_name);

    /// Applies an overlay file to the guest tree and enables every
    /// candidate whose node turned "okay".
    std::vector<std::string> apply_overlay_file(const std::filesystem::path& overlay_path);

    /// Runs the scenario's benchmark grid and writes report.md, report.csv
    /// and overhead.csv under `out_dir`.
    std::vector<BenchRecord> bench(const std::filesystem::path& out_dir);

    /// Same grid without writing files.
    std::vector<BenchRecord> bench_records();

    /// The harness wiring for custom benchmark runs. Requires a live,
    /// enabled CDMA device.
    BenchSystem bench_system();

private:
    Scenario scenario_;
    SimClock clock_;
    std::unique_ptr<GuestMemory> ram_;
    DtNode tree_;
    std::vector<VfioDevice> devices_;
    std::unique_ptr<IommuContainer> host_container_;
    std::unique_ptr<IommuContainer> guest_container_;
    std::unique_ptr<FabricRegion> fabric_;
    std::unique_ptr<FpgaManager> manager_;
    std::unique_ptr<VfpgaFrontend> frontend_;
    std::unique_ptr<VfpgaBackend> backend_;
};

/// Runs the calibration checks, the reference overhead checks, and the
/// invariant suite end to end. Prints one line per check to `out`; returns
/// 0 on success, 2 on any failure.
int run_selftest(const Scenario& scenario, std::ostream& out);

} // namespace vfpga

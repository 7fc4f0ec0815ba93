// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vfpga/fabric.hpp"

namespace vfpga {

enum class Env {
    Host = 0,
    Guest = 1,
};

const char* env_name(Env env) noexcept;

/// One (pages, microseconds) calibration point.
struct PrepSample {
    uint32_t pages = 0;
    double mean_us = 0.0;
};

struct LinearFit {
    double intercept_us = 0.0;     // a
    double slope_us_per_page = 0.0; // b
    double max_rel_residual = 0.0; // worst |fit - sample| / sample
};

/// Ordinary least-squares line through the samples. Needs at least two
/// distinct page counts.
LinearFit fit_prep_line(std::span<const PrepSample> samples);

/// A (transfer bytes, overhead fraction) calibration target.
struct OverheadTarget {
    uint64_t bytes = 0;
    double overhead = 0.0; // e.g. 1.52 for 152%
};

struct XferParams {
    double fixed_us = 0.0; // F: per-transfer fixed cost
    double virt_us = 0.0;  // V: guest-only virtualization surcharge
};

/// Solves O(s) = V / (F + s/B) through two targets for F and V.
XferParams solve_xfer_params(OverheadTarget small, OverheadTarget big,
                             double bandwidth_bytes_per_us);

/// Built-in calibration datasets (reference dmatest measurements).
std::span<const PrepSample> reference_prep_samples(Env env);
std::array<OverheadTarget, 2> reference_overhead_targets(DmaMode mode);

/// Analytic cost model: preparation linear in pages per environment;
/// transfer = fixed + surcharge (guest only) + bytes / shared bandwidth.
/// Jitter is a zero-mean Gaussian factor proportional to the mean.
struct TimeModel {
    static constexpr double kDefaultBandwidth = 3200.0; // bytes/us
    static constexpr double kDefaultHostSigma = 0.01;
    static constexpr double kMaxGuestXferStdUs = 13.28; // sets the guest sigma
    static constexpr uint64_t kDefaultSeed = 1;

    std::array<double, 2> prep_intercept_us{};  // [Env]
    std::array<double, 2> prep_slope_us{};      // [Env]
    std::array<XferParams, 2> xfer{};           // [DmaMode]
    double bandwidth_bytes_per_us = kDefaultBandwidth;
    std::array<double, 2> jitter_sigma{};       // [Env]
    uint64_t rng_seed = kDefaultSeed;

    double prep_us(Env env, uint32_t pages) const;
    double transfer_us(Env env, DmaMode mode, uint64_t bytes) const;

    /// Model calibrated from the built-in datasets. The guest sigma is set
    /// so the largest guest transfer std over the default grid lands at
    /// kMaxGuestXferStdUs.
    static TimeModel builtin(uint64_t seed = kDefaultSeed);

    /// With all sigmas zeroed; runs become fully deterministic.
    TimeModel without_jitter() const;

    std::string to_json() const;
    static TimeModel from_json(const std::string& text);
};

struct BenchConfig {
    std::vector<uint32_t> sizes = {1, 16, 32, 64, 128, 256}; // pages
    uint32_t iterations = 500;
    std::vector<DmaMode> modes = {DmaMode::Interrupt, DmaMode::Polled};
    std::vector<Env> envs = {Env::Host, Env::Guest};
    uint32_t page_size = 4096;
};

struct BenchRecord {
    Env env = Env::Host;
    DmaMode mode = DmaMode::Interrupt;
    uint32_t pages = 0;
    double prep_mean_us = 0.0;
    double prep_std_us = 0.0;
    double xfer_mean_us = 0.0;
    double xfer_std_us = 0.0;
};

/// Everything the harness drives. The passthrough device must be enabled
/// before any benchmark runs.
struct BenchSystem {
    GuestMemory& ddr;
    IommuContainer& host_container;
    IommuContainer& guest_container;
    CdmaDevice& cdma;
    const VfioDevice& passthrough;
    SimClock& clock;
    uint64_t src_pa = 0; // source staging area in DDR
    uint64_t dst_pa = 0; // destination staging area; must not overlap src
};

/// dmatest-style loop: per (env, mode, size), `iterations` rounds of
/// map / submit / wait / verify / unmap, collecting mean and sample std of
/// the preparation and transfer times on the simulated clock.
std::vector<BenchRecord> run_dmatest(const BenchConfig& config, const TimeModel& model,
                                     BenchSystem& system);

/// 100 * (guest - host) / host over the transfer means.
double compute_overhead_pct(const BenchRecord& host, const BenchRecord& guest);

std::string emit_report_csv(std::span<const BenchRecord> records);
std::string emit_report_markdown(std::span<const BenchRecord> records);
/// Size vs overhead per mode, one row per size (plot-ready).
std::string emit_overhead_csv(std::span<const BenchRecord> records);

/// Deterministic Gaussian source (Box-Muller over a 64-bit Mersenne
/// twister); identical streams on every platform.
class JitterRng {
public:
    explicit JitterRng(uint64_t seed) : state_(seed ? seed : 0x9E3779B97F4A7C15ull) {}

    double uniform01(); // in (0, 1]
    double gaussian();  // standard normal

    /// Multiplicative jitter factor 1 + N(0, sigma), floored at 1e-3.
    double factor(double sigma);

private:
    uint64_t next_u64();
    uint64_t state_;
};

} // namespace vfpga

// SPDX-License-Identifier: Apache-2.0
#include "vfpga/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <map>
#include <set>

#include <json.hpp>

namespace vfpga {

const char* env_name(Env env) noexcept {
    return env == Env::Host ? "host" : "guest";
}

LinearFit fit_prep_line(std::span<const PrepSample> samples) {
    if (samples.size() < 2)
        throw Error(Errc::DegenerateFit, "need at least two samples");

    double n = static_cast<double>(samples.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const PrepSample& s : samples) {
        double x = s.pages;
        sx += x;
        sy += s.mean_us;
        sxx += x * x;
        sxy += x * s.mean_us;
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0.0)
        throw Error(Errc::DegenerateFit, "all samples share one page count");

    LinearFit fit;
    fit.slope_us_per_page = (n * sxy - sx * sy) / denom;
    fit.intercept_us = (sy - fit.slope_us_per_page * sx) / n;
    for (const PrepSample& s : samples) {
        double predicted = fit.intercept_us + fit.slope_us_per_page * s.pages;
        double rel = std::abs(predicted - s.mean_us) / std::abs(s.mean_us);
        fit.max_rel_residual = std::max(fit.max_rel_residual, rel);
    }
    return fit;
}

XferParams solve_xfer_params(OverheadTarget small, OverheadTarget big,
                             double bandwidth_bytes_per_us) {
    if (bandwidth_bytes_per_us <= 0.0)
        throw Error(Errc::InvalidArgument, "bandwidth must be positive");
    if (small.overhead <= big.overhead)
        throw Error(Errc::InvalidArgument, "overhead must decrease with size");

    double t_small = static_cast<double>(small.bytes) / bandwidth_bytes_per_us;
    double t_big = static_cast<double>(big.bytes) / bandwidth_bytes_per_us;

    XferParams params;
    params.fixed_us =
        (big.overhead * t_big - small.overhead * t_small) / (small.overhead - big.overhead);
    params.virt_us = small.overhead * (params.fixed_us + t_small);
    if (params.fixed_us <= 0.0 || params.virt_us <= 0.0)
        throw Error(Errc::NonPositiveSolution, "calibration yields non-positive parameters");
    return params;
}

namespace {

// Reference dmatest measurements driving the built-in calibration:
// preparation means per environment and the overhead endpoints per mode.
constexpr std::array<PrepSample, 6> kHostPrep = {{{1, 6.14},
                                                  {16, 62.5},
                                                  {32, 122.3},
                                                  {64, 242.37},
                                                  {128, 474.334},
                                                  {256, 748.6}}};
constexpr std::array<PrepSample, 6> kGuestPrep = {{{1, 4.36},
                                                   {16, 42.34},
                                                   {32, 82.79},
                                                   {64, 162.8},
                                                   {128, 292.18},
                                                   {256, 411.2}}};
constexpr uint64_t kSmallBytes = 4096;        // 1 page
constexpr uint64_t kBigBytes = 1048576;       // 256 pages
constexpr double kPolledSmallOverhead = 1.52; // 152%
constexpr double kPolledBigOverhead = 0.05;
constexpr double kIrqSmallOverhead = 1.12;
constexpr double kIrqBigOverhead = 0.126;

size_t mode_index(DmaMode mode) {
    return static_cast<size_t>(mode);
}
size_t env_index(Env env) {
    return static_cast<size_t>(env);
}

} // namespace

std::span<const PrepSample> reference_prep_samples(Env env) {
    return env == Env::Host ? std::span<const PrepSample>(kHostPrep)
                            : std::span<const PrepSample>(kGuestPrep);
}

std::array<OverheadTarget, 2> reference_overhead_targets(DmaMode mode) {
    if (mode == DmaMode::Polled)
        return {{{kSmallBytes, kPolledSmallOverhead}, {kBigBytes, kPolledBigOverhead}}};
    return {{{kSmallBytes, kIrqSmallOverhead}, {kBigBytes, kIrqBigOverhead}}};
}

double TimeModel::prep_us(Env env, uint32_t pages) const {
    return prep_intercept_us[env_index(env)] + prep_slope_us[env_index(env)] * pages;
}

double TimeModel::transfer_us(Env env, DmaMode mode, uint64_t bytes) const {
    const XferParams& p = xfer[mode_index(mode)];
    double t = p.fixed_us + static_cast<double>(bytes) / bandwidth_bytes_per_us;
    if (env == Env::Guest)
        t += p.virt_us;
    return t;
}

TimeModel TimeModel::builtin(uint64_t seed) {
    TimeModel model;
    for (Env env : {Env::Host, Env::Guest}) {
        LinearFit fit = fit_prep_line(reference_prep_samples(env));
        model.prep_intercept_us[env_index(env)] = fit.intercept_us;
        model.prep_slope_us[env_index(env)] = fit.slope_us_per_page;
    }
    for (DmaMode mode : {DmaMode::Interrupt, DmaMode::Polled}) {
        auto targets = reference_overhead_targets(mode);
        model.xfer[mode_index(mode)] =
            solve_xfer_params(targets[0], targets[1], model.bandwidth_bytes_per_us);
    }
    model.jitter_sigma[env_index(Env::Host)] = kDefaultHostSigma;
    // Pin the guest sigma so the largest transfer std over the default grid
    // (the slowest cell: interrupt, 256 pages) lands on the reference value.
    model.jitter_sigma[env_index(Env::Guest)] =
        kMaxGuestXferStdUs / model.transfer_us(Env::Guest, DmaMode::Interrupt, kBigBytes);
    model.rng_seed = seed;
    return model;
}

TimeModel TimeModel::without_jitter() const {
    TimeModel copy = *this;
    copy.jitter_sigma = {0.0, 0.0};
    return copy;
}

std::string TimeModel::to_json() const {
    nlohmann::json j;
    j["prep"]["host"] = {{"a", prep_intercept_us[0]}, {"b", prep_slope_us[0]}};
    j["prep"]["guest"] = {{"a", prep_intercept_us[1]}, {"b", prep_slope_us[1]}};
    j["xfer"]["interrupt"] = {{"F", xfer[0].fixed_us}, {"V", xfer[0].virt_us}};
    j["xfer"]["polled"] = {{"F", xfer[1].fixed_us}, {"V", xfer[1].virt_us}};
    j["B"] = bandwidth_bytes_per_us;
    j["jitter"] = {{"host", jitter_sigma[0]}, {"guest", jitter_sigma[1]}};
    j["seed"] = rng_seed;
    return j.dump(2) + "\n";
}

TimeModel TimeModel::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        TimeModel model;
        model.prep_intercept_us = {j.at("prep").at("host").at("a").get<double>(),
                                   j.at("prep").at("guest").at("a").get<double>()};
        model.prep_slope_us = {j.at("prep").at("host").at("b").get<double>(),
                               j.at("prep").at("guest").at("b").get<double>()};
        model.xfer[0] = {j.at("xfer").at("interrupt").at("F").get<double>(),
                         j.at("xfer").at("interrupt").at("V").get<double>()};
        model.xfer[1] = {j.at("xfer").at("polled").at("F").get<double>(),
                         j.at("xfer").at("polled").at("V").get<double>()};
        model.bandwidth_bytes_per_us = j.at("B").get<double>();
        model.jitter_sigma = {j.at("jitter").at("host").get<double>(),
                              j.at("jitter").at("guest").get<double>()};
        model.rng_seed = j.at("seed").get<uint64_t>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("calibration file: ") + e.what());
    }
}

uint64_t JitterRng::next_u64() {
    // splitmix64; fully specified, identical everywhere.
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double JitterRng::uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double JitterRng::gaussian() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double JitterRng::factor(double sigma) {
    double g = gaussian(); // always drawn, keeping streams aligned across sigmas
    return std::max(1.0 + sigma * g, 1e-3);
}

namespace {

struct Stats {
    double mean = 0.0;
    double stddev = 0.0;
};

Stats two_pass_stats(std::span<const double> samples) {
    Stats s;
    double sum = 0.0;
    for (double x : samples)
        sum += x;
    s.mean = sum / static_cast<double>(samples.size());
    double acc = 0.0;
    for (double x : samples)
        acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(samples.size() - 1));
    return s;
}

constexpr uint64_t kHostSrcIova = 0x10000000ull;
constexpr uint64_t kHostDstIova = 0x18000000ull;

void fill_pattern(std::span<std::byte> area, uint32_t salt) {
    uint32_t state = salt * 2654435761u + 12345u;
    for (std::byte& b : area) {
        state = state * 1664525u + 1013904223u;
        b = std::byte{static_cast<uint8_t>(state >> 24)};
    }
}

std::string format_fixed(double value, int precision) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

} // namespace

std::vector<BenchRecord> run_dmatest(const BenchConfig& config, const TimeModel& model,
                                     BenchSystem& system) {
    if (!system.passthrough.enabled())
        throw Error(Errc::DeviceNotEnabled, system.passthrough.node_path());
    if (config.iterations < 2)
        throw Error(Errc::InvalidArgument, "iterations must be at least 2");
    if (config.sizes.empty() || config.modes.empty() || config.envs.empty())
        throw Error(Errc::InvalidArgument, "empty benchmark grid");

    uint64_t max_len = 0;
    for (uint32_t pages : config.sizes)
        max_len = std::max<uint64_t>(max_len, uint64_t{pages} * config.page_size);
    if (!system.ddr.contains(system.src_pa, max_len) ||
        !system.ddr.contains(system.dst_pa, max_len))
        throw Error(Errc::RegionOutOfBounds, "benchmark staging areas");
    if (system.src_pa < system.dst_pa + max_len && system.dst_pa < system.src_pa + max_len)
        throw Error(Errc::InvalidArgument, "staging areas overlap");

    JitterRng rng(model.rng_seed);
    std::vector<BenchRecord> records;
    std::vector<double> prep_samples, xfer_samples;
    prep_samples.reserve(config.iterations);
    xfer_samples.reserve(config.iterations);

    for (Env env : config.envs) {
        IommuContainer& container =
            env == Env::Host ? system.host_container : system.guest_container;
        double sigma = model.jitter_sigma[static_cast<size_t>(env)];
        system.cdma.set_cost_model([&model, &rng, env, sigma](DmaMode mode, uint64_t bytes) {
            return model.transfer_us(env, mode, bytes) * rng.factor(sigma);
        });

        for (DmaMode mode : config.modes) {
            for (uint32_t pages : config.sizes) {
                uint64_t len = uint64_t{pages} * config.page_size;
                uint64_t src_iova = env == Env::Host ? kHostSrcIova : system.src_pa;
                uint64_t dst_iova = env == Env::Host ? kHostDstIova : system.dst_pa;

                fill_pattern(system.ddr.view(system.src_pa, len),
                             pages * 7919u + static_cast<uint32_t>(env) * 13u +
                                 static_cast<uint32_t>(mode));
                std::memset(system.ddr.view(system.dst_pa, len).data(), 0, len);

                prep_samples.clear();
                xfer_samples.clear();

                for (uint32_t it = 0; it < config.iterations; ++it) {
                    // Re-stamp the source so a stale destination can never
                    // pass verification.
                    uint32_t stamp = it + 1;
                    std::memcpy(system.ddr.view(system.src_pa, 4).data(), &stamp, 4);

                    double prep_t = model.prep_us(env, pages) * rng.factor(sigma);
                    system.clock.advance_us(prep_t);
                    container.map(src_iova, system.src_pa, len, Perm::R);
                    container.map(dst_iova, system.dst_pa, len, Perm::W);
                    prep_samples.push_back(prep_t);

                    double t0 = system.clock.now_us();
                    DmaTransfer xfer{src_iova, dst_iova, len, mode};
                    DmaHandle handle = system.cdma.submit(container, xfer, system.clock);
                    DmaStatus status = system.cdma.wait(handle, system.clock);
                    if (status != DmaStatus::Ok)
                        throw Error(Errc::TranslationFault, "benchmark transfer faulted");
                    xfer_samples.push_back(system.clock.now_us() - t0);

                    auto src_view = system.ddr.view(system.src_pa, len);
                    auto dst_view = system.ddr.view(system.dst_pa, len);
                    if (std::memcmp(src_view.data(), dst_view.data(), len) != 0)
                        throw Error(Errc::VerificationFailed,
                                    "destination does not match source");

                    container.unmap(src_iova, len);
                    container.unmap(dst_iova, len);
                }

                Stats prep = two_pass_stats(prep_samples);
                Stats xf = two_pass_stats(xfer_samples);
                records.push_back(
                    {env, mode, pages, prep.mean, prep.stddev, xf.mean, xf.stddev});
            }
        }
    }
    return records;
}

double compute_overhead_pct(const BenchRecord& host, const BenchRecord& guest) {
    if (host.mode != guest.mode || host.pages != guest.pages)
        throw Error(Errc::InvalidArgument, "overhead needs matching (mode, size) records");
    if (host.xfer_mean_us <= 0.0)
        throw Error(Errc::InvalidArgument, "host transfer mean must be positive");
    return 100.0 * (guest.xfer_mean_us - host.xfer_mean_us) / host.xfer_mean_us;
}

namespace {

const BenchRecord* find_record(std::span<const BenchRecord> records, Env env, DmaMode mode,
                               uint32_t pages) {
    for (const BenchRecord& r : records)
        if (r.env == env && r.mode == mode && r.pages == pages)
            return &r;
    return nullptr;
}

} // namespace

std::string emit_report_csv(std::span<const BenchRecord> records) {
    std::string out = "env,mode,pages,prep_mean_us,prep_std_us,xfer_mean_us,xfer_std_us,"
                      "overhead_pct\n";
    for (const BenchRecord& r : records) {
        out += env_name(r.env);
        out += ',';
        out += dma_mode_name(r.mode);
        out += ',';
        out += std::to_string(r.pages);
        out += ',';
        out += format_fixed(r.prep_mean_us, 6);
        out += ',';
        out += format_fixed(r.prep_std_us, 6);
        out += ',';
        out += format_fixed(r.xfer_mean_us, 6);
        out += ',';
        out += format_fixed(r.xfer_std_us, 6);
        out += ',';
        if (r.env == Env::Guest) {
            if (const BenchRecord* host = find_record(records, Env::Host, r.mode, r.pages))
                out += format_fixed(compute_overhead_pct(*host, r), 6);
        }
        out += '\n';
    }
    return out;
}

std::string emit_overhead_csv(std::span<const BenchRecord> records) {
    std::set<uint32_t> sizes;
    for (const BenchRecord& r : records)
        sizes.insert(r.pages);

    std::string out = "pages,bytes,interrupt_overhead_pct,polled_overhead_pct\n";
    for (uint32_t pages : sizes) {
        out += std::to_string(pages);
        out += ',';
        out += std::to_string(uint64_t{pages} * 4096);
        for (DmaMode mode : {DmaMode::Interrupt, DmaMode::Polled}) {
            out += ',';
            const BenchRecord* host = find_record(records, Env::Host, mode, pages);
            const BenchRecord* guest = find_record(records, Env::Guest, mode, pages);
            if (host && guest)
                out += format_fixed(compute_overhead_pct(*host, *guest), 6);
        }
        out += '\n';
    }
    return out;
}

std::string emit_report_markdown(std::span<const BenchRecord> records) {
    std::set<uint32_t> sizes;
    std::vector<DmaMode> modes;
    for (const BenchRecord& r : records) {
        sizes.insert(r.pages);
        if (std::find(modes.begin(), modes.end(), r.mode) == modes.end())
            modes.push_back(r.mode);
    }
    if (records.empty() || modes.empty())
        return "# DMA benchmark report\n\n(no records)\n";

    auto header_row = [&] {
        std::string row = "|  |";
        for (uint32_t pages : sizes)
            row += " " + std::to_string(pages) + " |";
        row += "\n|---|";
        for (size_t i = 0; i < sizes.size(); ++i)
            row += "---|";
        row += "\n";
        return row;
    };

    auto value_row = [&](const std::string& label, Env env, DmaMode mode, bool prep,
                         bool stddev) {
        std::string row = "| " + label + " |";
        for (uint32_t pages : sizes) {
            const BenchRecord* r = find_record(records, env, mode, pages);
            row += ' ';
            if (r) {
                double v = prep ? (stddev ? r->prep_std_us : r->prep_mean_us)
                                : (stddev ? r->xfer_std_us : r->xfer_mean_us);
                row += format_fixed(v, 3);
            }
            row += " |";
        }
        return row + "\n";
    };

    std::string out = "# DMA benchmark report\n\n";
    out += "Transfer sizes are in 4 KiB pages; all values in microseconds.\n\n";

    out += "## Preparation time (" + std::string(dma_mode_name(modes.front())) + " runs)\n\n";
    out += header_row();
    out += value_row("Host avg", Env::Host, modes.front(), true, false);
    out += value_row("Host std", Env::Host, modes.front(), true, true);
    out += value_row("Guest avg", Env::Guest, modes.front(), true, false);
    out += value_row("Guest std", Env::Guest, modes.front(), true, true);
    out += "\n";

    for (DmaMode mode : modes) {
        out += "## Transfer time, " + std::string(dma_mode_name(mode)) + "\n\n";
        out += header_row();
        out += value_row("Host avg", Env::Host, mode, false, false);
        out += value_row("Host std", Env::Host, mode, false, true);
        out += value_row("Guest avg", Env::Guest, mode, false, false);
        out += value_row("Guest std", Env::Guest, mode, false, true);
        out += "\n";
    }

    out += "## Virtualization overhead (percent)\n\n";
    out += header_row();
    for (DmaMode mode : modes) {
        std::string row = "| " + std::string(dma_mode_name(mode)) + " |";
        for (uint32_t pages : sizes) {
            const BenchRecord* host = find_record(records, Env::Host, mode, pages);
            const BenchRecord* guest = find_record(records, Env::Guest, mode, pages);
            row += ' ';
            if (host && guest)
                row += format_fixed(compute_overhead_pct(*host, *guest), 2);
            row += " |";
        }
        out += row + "\n";
    }
    return out;
}

} // namespace vfpga

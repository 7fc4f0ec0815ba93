// SPDX-License-Identifier: Apache-2.0
#include "vfpga/system.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace vfpga {

namespace {

constexpr uint64_t kSrcOffset = 0x100000;
constexpr uint64_t kDstOffset = 0x300000;
constexpr uint64_t kVdevBufferOffset = 0x500000;

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file)
        throw Error(Errc::InvalidArgument, "cannot read " + path.string());
    std::ostringstream ss;
    ss << file.rdbuf();
    return ss.str();
}

DmaMode parse_mode(const std::string& s) {
    if (s == "interrupt")
        return DmaMode::Interrupt;
    if (s == "polled")
        return DmaMode::Polled;
    throw Error(Errc::InvalidArgument, "unknown mode '" + s + "'");
}

Env parse_env(const std::string& s) {
    if (s == "host")
        return Env::Host;
    if (s == "guest")
        return Env::Guest;
    throw Error(Errc::InvalidArgument, "unknown env '" + s + "'");
}

} // namespace

Scenario Scenario::load(const std::filesystem::path& json_file) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(json_file));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidArgument, json_file.string() + ": " + e.what());
    }

    auto dir = json_file.parent_path();
    auto resolve = [&dir](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : dir / path;
    };

    Scenario s;
    try {
        s.base_dts = resolve(j.at("base_dts").get<std::string>());
        s.overlay = resolve(j.at("overlay").get<std::string>());
        s.firmware_dir = resolve(j.at("firmware_dir").get<std::string>());
        s.firmware_name = j.at("firmware_name").get<std::string>();
        if (j.contains("seed"))
            s.seed = j.at("seed").get<uint64_t>();
        if (j.contains("calibration")) {
            std::string cal = j.at("calibration").get<std::string>();
            if (cal != "builtin")
                s.calibration = resolve(cal);
        }
        if (j.contains("bench")) {
            const auto& b = j.at("bench");
            if (b.contains("sizes"))
                s.bench.sizes = b.at("sizes").get<std::vector<uint32_t>>();
            if (b.contains("iterations"))
                s.bench.iterations = b.at("iterations").get<uint32_t>();
            if (b.contains("page_size"))
                s.bench.page_size = b.at("page_size").get<uint32_t>();
            if (b.contains("modes")) {
                s.bench.modes.clear();
                for (const auto& m : b.at("modes"))
                    s.bench.modes.push_back(parse_mode(m.get<std::string>()));
            }
            if (b.contains("envs")) {
                s.bench.envs.clear();
                for (const auto& e : b.at("envs"))
                    s.bench.envs.push_back(parse_env(e.get<std::string>()));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidArgument, json_file.string() + ": " + e.what());
    }

    for (const auto& [label, path] :
         {std::pair<const char*, const std::filesystem::path&>{"base_dts", s.base_dts},
          {"overlay", s.overlay}}) {
        if (!std::filesystem::is_regular_file(path))
            throw Error(Errc::InvalidArgument,
                        std::string(label) + " path " + path.string() + " does not exist");
    }
    if (!std::filesystem::is_directory(s.firmware_dir))
        throw Error(Errc::MissingFirmwareDir, s.firmware_dir.string());
    if (s.calibration && !std::filesystem::is_regular_file(*s.calibration))
        throw Error(Errc::InvalidArgument,
                    "calibration path " + s.calibration->string() + " does not exist");
    return s;
}

TimeModel Scenario::time_model() const {
    TimeModel model = calibration ? TimeModel::from_json(read_text_file(*calibration))
                                  : TimeModel::builtin();
    model.rng_seed = seed;
    return model;
}

SystemState::SystemState(Scenario scenario) : scenario_(std::move(scenario)) {
    ram_ = std::make_unique<GuestMemory>(kRamBase, kRamBytes);
    tree_ = parse_dts(read_text_file(scenario_.base_dts));

    // Pass through every disabled candidate under /axi.
    const DtNode* axi = tree_.find_path("/axi");
    if (axi) {
        for (const DtNode& child : axi->children) {
            if (child.status_is("disabled"))
                devices_.push_back(
                    VfioDevice::create_passthrough(tree_, "/axi/" + child.name));
        }
    }

    host_container_ = std::make_unique<IommuContainer>(IommuContainer::on_demand());
    guest_container_ = std::make_unique<IommuContainer>(
        IommuContainer::direct(kRamBase, kRamBase, kRamBytes));

    fabric_ = std::make_unique<FabricRegion>(kFabricRegionId, *ram_);
    manager_ = std::make_unique<FpgaManager>("vfpga0", make_default_vendor_ops(),
                                             scenario_.firmware_dir, *fabric_);

    VfpgaDeviceConfig config;
    frontend_ = std::make_unique<VfpgaFrontend>(config, *ram_, clock_,
                                               kRamBase + kVdevBufferOffset);
    backend_ = std::make_unique<VfpgaBackend>(config, frontend_->filename_queue(),
                                              frontend_->status_queue(), *manager_, *ram_);
    frontend_->connect(*backend_);
}

std::string SystemState::boot_summary() const {
    std::ostringstream out;
    out << "guest memory: 0x" << std::hex << kRamBase << "-0x" << kRamBase + kRamBytes
        << std::dec << "\n";
    out << "passthrough candidates: " << devices_.size() << "\n";
    for (const VfioDevice& dev : devices_) {
        const DtNode* node = tree_.find_path(dev.node_path());
        out << "  " << dev.node_path() << ": reg";
        for (const auto& window : dev.guard().reg)
            out << " 0x" << std::hex << window[0] << "/0x" << window[1] << std::dec;
        if (!dev.guard().interrupts.empty()) {
            out << " irq";
            for (uint32_t line : dev.guard().interrupts)
                out << " " << line;
        }
        out << " status "
            << (node && node->status_is("okay") ? "okay" : "disabled")
            << (dev.enabled() ? " (enabled)" : " (not enabled)") << "\n";
    }
    return out.str();
}

ProgramStatus SystemState::program(const std::string& firmware_name) {
    return frontend_->firmware_store(firmware_name);
}

std::vector<std::string> SystemState::apply_overlay_file(
    const std::filesystem::path& overlay_path) {
    Overlay overlay = parse_overlay(read_text_file(overlay_path));

    GuardMap guards;
    for (const VfioDevice& dev : devices_)
        guards.emplace(dev.node_path(), dev.guard());

    tree_ = apply_overlay(tree_, overlay, guards);

    std::vector<std::string> enabled;
    for (VfioDevice& dev : devices_) {
        const DtNode* node = tree_.find_path(dev.node_path());
        if (!dev.enabled() && node && node->status_is("okay")) {
            enable_device(dev, *fabric_, tree_);
            enabled.push_back(dev.node_path());
        }
    }
    return enabled;
}

BenchSystem SystemState::bench_system() {
    CdmaDevice* cdma = fabric_->find_cdma();
    if (!cdma)
        throw Error(Errc::DeviceNotEnabled, "no CDMA device is configured in the fabric");

    const VfioDevice* passthrough = nullptr;
    for (const VfioDevice& dev : devices_) {
        if (!dev.guard().reg.empty() && dev.guard().reg[0][0] == cdma->record().reg_base) {
            passthrough = &dev;
            break;
        }
    }
    if (!passthrough)
        throw Error(Errc::DeviceNotEnabled, "no passthrough candidate matches the CDMA device");

    return BenchSystem{*ram_,  *host_container_, *guest_container_, *cdma,
                       *passthrough, clock_,     kRamBase + kSrcOffset,
                       kRamBase + kDstOffset};
}

std::vector<BenchRecord> SystemState::bench_records() {
    BenchSystem system = bench_system();
    return run_dmatest(scenario_.bench, scenario_.time_model(), system);
}

std::vector<BenchRecord> SystemState::bench(const std::filesystem::path& out_dir) {
    std::vector<BenchRecord> records = bench_records();

    std::filesystem::create_directories(out_dir);
    auto write_file = [&out_dir](const char* name, const std::string& text) {
        std::ofstream file(out_dir / name, std::ios::binary);
        if (!file)
            throw Error(Errc::InvalidArgument, "cannot write " + (out_dir / name).string());
        file << text;
    };
    write_file("report.csv", emit_report_csv(records));
    write_file("report.md", emit_report_markdown(records));
    write_file("overhead.csv", emit_overhead_csv(records));
    return records;
}

namespace {

class CheckRunner {
public:
    explicit CheckRunner(std::ostream& out) : out_(out) {}

    void check(const std::string& name, bool ok, const std::string& detail = "") {
        ++total_;
        if (!ok)
            ++failures_;
        out_ << (ok ? "[ok]   " : "[FAIL] ") << name;
        if (!ok && !detail.empty())
            out_ << " — " << detail;
        out_ << "\n";
    }

    template <typename Fn> void check_throws(const std::string& name, Errc code, Fn&& fn) {
        try {
            fn();
            check(name, false, "no error raised");
        } catch (const Error& e) {
            check(name, e.code() == code, std::string("raised ") + errc_name(e.code()));
        }
    }

    int total() const { return total_; }
    int failures() const { return failures_; }

private:
    std::ostream& out_;
    int total_ = 0;
    int failures_ = 0;
};

double overhead_at(std::span<const BenchRecord> records, DmaMode mode, uint32_t pages) {
    const BenchRecord* host = nullptr;
    const BenchRecord* guest = nullptr;
    for (const BenchRecord& r : records) {
        if (r.mode == mode && r.pages == pages)
            (r.env == Env::Host ? host : guest) = &r;
    }
    if (!host || !guest)
        throw Error(Errc::InvalidArgument, "missing records for overhead");
    return compute_overhead_pct(*host, *guest);
}

} // namespace

int run_selftest(const Scenario& scenario, std::ostream& out) {
    CheckRunner runner(out);

    // Calibration shape.
    TimeModel model = scenario.time_model();
    for (DmaMode mode : {DmaMode::Interrupt, DmaMode::Polled}) {
        auto targets = reference_overhead_targets(mode);
        for (const OverheadTarget& target : targets) {
            double host = model.transfer_us(Env::Host, mode, target.bytes);
            double guest = model.transfer_us(Env::Guest, mode, target.bytes);
            double overhead = (guest - host) / host;
            runner.check(std::string("calibration: ") + dma_mode_name(mode) + " overhead at " +
                             std::to_string(target.bytes) + " bytes",
                         std::abs(overhead - target.overhead) < 1e-9,
                         "model gives " + std::to_string(overhead));
        }
    }
    for (uint32_t pages : scenario.bench.sizes) {
        runner.check("calibration: guest prep below host prep at " + std::to_string(pages) +
                         " pages",
                     model.prep_us(Env::Guest, pages) < model.prep_us(Env::Host, pages));
    }

    // End-to-end lifecycle.
    std::vector<BenchRecord> deterministic;
    try {
        SystemState state(scenario);

        bool disabled_before = true;
        for (const VfioDevice& dev : state.devices())
            disabled_before = disabled_before && !dev.enabled();
        runner.check("lifecycle: candidates start disabled", disabled_before);

        runner.check_throws("lifecycle: benchmark rejected before enable", Errc::DeviceNotEnabled,
                            [&] { state.bench_records(); });

        ProgramStatus status = state.program(scenario.firmware_name);
        runner.check("lifecycle: programming reports OK", status == ProgramStatus::Ok,
                     program_status_text(status));

        auto enabled = state.apply_overlay_file(scenario.overlay);
        runner.check("lifecycle: overlay enables a device", !enabled.empty());

        // Deterministic grid for the reference checks: zero jitter, small
        // iteration count, the scenario's sizes.
        Scenario quiet = scenario;
        quiet.bench.iterations = 4;
        SystemState quiet_state(quiet);
        quiet_state.program(quiet.firmware_name);
        quiet_state.apply_overlay_file(quiet.overlay);
        TimeModel zero = quiet.time_model().without_jitter();
        BenchSystem system = quiet_state.bench_system();
        deterministic = run_dmatest(quiet.bench, zero, system);
        runner.check("lifecycle: deterministic grid complete",
                     deterministic.size() == quiet.bench.sizes.size() *
                                                 quiet.bench.modes.size() *
                                                 quiet.bench.envs.size());

        // Reference overhead checks on the deterministic grid.
        if (std::count(quiet.bench.sizes.begin(), quiet.bench.sizes.end(), 1u) &&
            std::count(quiet.bench.sizes.begin(), quiet.bench.sizes.end(), 256u)) {
            struct Target {
                DmaMode mode;
                uint32_t pages;
                double pct;
                double tol;
            };
            for (const Target& t : {Target{DmaMode::Polled, 1, 152.0, 5.0},
                                    Target{DmaMode::Interrupt, 1, 112.0, 5.0},
                                    Target{DmaMode::Polled, 256, 5.0, 1.0},
                                    Target{DmaMode::Interrupt, 256, 12.6, 1.0}}) {
                double measured = overhead_at(deterministic, t.mode, t.pages);
                runner.check("reference overhead: " + std::string(dma_mode_name(t.mode)) +
                                 " at " + std::to_string(t.pages) + " pages",
                             std::abs(measured - t.pct) <= t.tol,
                             "measured " + std::to_string(measured) + "%, want " +
                                 std::to_string(t.pct) + " ± " + std::to_string(t.tol));
            }
        }

        // Trend invariants.
        bool monotone = true;
        for (DmaMode mode : quiet.bench.modes) {
            double prev = -1.0;
            for (auto it = quiet.bench.sizes.begin(); it != quiet.bench.sizes.end(); ++it) {
                double o = overhead_at(deterministic, mode, *it);
                if (prev >= 0.0 && o >= prev)
                    monotone = false;
                prev = o;
            }
        }
        runner.check("invariants: overhead strictly decreasing in size", monotone);

        bool polled_faster = true;
        for (const BenchRecord& r : deterministic) {
            if (r.mode != DmaMode::Polled)
                continue;
            for (const BenchRecord& other : deterministic)
                if (other.env == r.env && other.pages == r.pages &&
                    other.mode == DmaMode::Interrupt && !(r.xfer_mean_us < other.xfer_mean_us))
                    polled_faster = false;
        }
        runner.check("invariants: polled transfers beat interrupt transfers", polled_faster);

        // Determinism: a second zero-jitter run is byte-identical.
        SystemState again(quiet);
        again.program(quiet.firmware_name);
        again.apply_overlay_file(quiet.overlay);
        BenchSystem system2 = again.bench_system();
        auto records2 = run_dmatest(quiet.bench, zero, system2);
        runner.check("invariants: zero-jitter runs are byte-identical",
                     emit_report_csv(deterministic) == emit_report_csv(records2));
    } catch (const Error& e) {
        runner.check("selftest execution", false, e.what());
    }

    out << "selftest: " << runner.total() << " checks, " << runner.failures() << " failures\n";
    return runner.failures() == 0 ? 0 : 2;
}

} // namespace vfpga

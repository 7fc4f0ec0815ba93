// SPDX-License-Identifier: Apache-2.0
//
// vfpga-sim: scenario runner for the simulated Virtio-FPGA stack.
//
//   vfpga-sim boot     --scenario FILE
//   vfpga-sim program  --scenario FILE [NAME]
//   vfpga-sim overlay  --scenario FILE [PATH]
//   vfpga-sim bench    --scenario FILE [--out DIR] [--seed N]
//   vfpga-sim selftest --scenario FILE [--seed N]
//   vfpga-sim mkimage  --out FILE [--image SPEC.json]
//
// Exit codes: 0 success, 1 user/config error, 2 invariant/verification
// failure.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfpga/system.hpp"

namespace {

using namespace vfpga;

int exit_code_for(const Error& e) {
    switch (e.code()) {
    case Errc::VerificationFailed:
    case Errc::InvalidState:
        return 2;
    default:
        return 1;
    }
}

Scenario load_scenario(const std::string& path, uint64_t* seed_override) {
    Scenario scenario = Scenario::load(path);
    if (seed_override)
        scenario.seed = *seed_override;
    return scenario;
}

/// Replays the lifecycle up to the requested stage; each subcommand runs in
/// a fresh process, so earlier stages are reconstructed from the scenario.
std::unique_ptr<SystemState> boot_and(const Scenario& scenario, bool do_program,
                                      bool do_overlay) {
    auto state = std::make_unique<SystemState>(scenario);
    if (do_program) {
        ProgramStatus status = state->program(scenario.firmware_name);
        std::cout << state->guest_log().back() << "\n";
        if (status != ProgramStatus::Ok)
            throw Error(Errc::InvalidArgument,
                        "programming failed: " + program_status_text(status));
    }
    if (do_overlay) {
        auto enabled = state->apply_overlay_file(scenario.overlay);
        for (const std::string& path : enabled)
            std::cout << "enabled " << path << "\n";
    }
    return state;
}

BitstreamImage image_from_spec(const nlohmann::json& j) {
    BitstreamImage image;
    image.region_id = j.value("region_id", 0);
    image.compatible = j.value("compatible", "");
    for (const auto& r : j.value("records", nlohmann::json::array())) {
        DeviceRecord rec;
        rec.name = r.at("name").get<std::string>();
        std::string type = r.at("type").get<std::string>();
        if (type == "cdma")
            rec.dev_type = DeviceType::Cdma;
        else if (type == "gpio")
            rec.dev_type = DeviceType::Gpio;
        else if (type == "none")
            rec.dev_type = DeviceType::None;
        else
            throw Error(Errc::InvalidArgument, "unknown device type '" + type + "'");
        rec.reg_base = std::stoull(r.at("reg_base").get<std::string>(), nullptr, 0);
        rec.reg_size = std::stoull(r.at("reg_size").get<std::string>(), nullptr, 0);
        if (r.contains("irq"))
            rec.irq_line = r.at("irq").get<uint16_t>();
        image.records.push_back(std::move(rec));
    }
    size_t payload_bytes = j.value("payload_bytes", 8192);
    uint64_t payload_seed = j.value("payload_seed", 7);
    JitterRng rng(payload_seed);
    image.payload.resize(payload_bytes);
    for (std::byte& b : image.payload)
        b = std::byte{static_cast<uint8_t>(rng.uniform01() * 256.0)};
    return image;
}

/// The demo image: one CDMA engine matching the demo device tree.
nlohmann::json default_image_spec() {
    return nlohmann::json{
        {"region_id", 0},
        {"compatible", "vos,sim-fabric"},
        {"records",
         nlohmann::json::array({{{"name", "cdma0"},
                                 {"type", "cdma"},
                                 {"reg_base", "0xa0000000"},
                                 {"reg_size", "0x1000"},
                                 {"irq", 4}}})},
        {"payload_bytes", 8192},
        {"payload_seed", 7},
    };
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated Virtio-FPGA stack"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    std::string overlay_arg;
    std::string program_arg;
    std::string mkimage_out;
    std::string mkimage_spec;
    uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
        if (needs_scenario)
            cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
        cmd->add_option("--seed", seed, "override the scenario seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* boot = app.add_subcommand("boot", "boot the system and list candidates");
    add_common(boot, true);
    CLI::App* program = app.add_subcommand("program", "program firmware through the guest");
    add_common(program, true);
    program->add_option("name", program_arg, "firmware name (default: scenario)");
    CLI::App* overlay = app.add_subcommand("overlay", "apply the overlay and enable devices");
    add_common(overlay, true);
    overlay->add_option("path", overlay_arg, "overlay file (default: scenario)");
    CLI::App* bench = app.add_subcommand("bench", "run the DMA benchmark grid");
    add_common(bench, true);
    bench->add_option("--out", out_dir, "report output directory");
    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in checks");
    add_common(selftest, true);
    CLI::App* mkimage = app.add_subcommand("mkimage", "write a firmware container");
    mkimage->add_option("--out", mkimage_out, "output .vfpb path")->required();
    mkimage->add_option("--image", mkimage_spec, "image description JSON (default: demo CDMA)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mkimage->parsed()) {
            nlohmann::json spec = default_image_spec();
            if (!mkimage_spec.empty()) {
                std::ifstream file(mkimage_spec);
                if (!file)
                    throw Error(Errc::InvalidArgument, "cannot read " + mkimage_spec);
                spec = nlohmann::json::parse(file);
            }
            auto bytes = encode_image(image_from_spec(spec));
            std::ofstream file(mkimage_out, std::ios::binary);
            if (!file)
                throw Error(Errc::InvalidArgument, "cannot write " + mkimage_out);
            file.write(reinterpret_cast<const char*>(bytes.data()),
                       static_cast<std::streamsize>(bytes.size()));
            std::cout << "wrote " << mkimage_out << " (" << bytes.size() << " bytes)\n";
            return 0;
        }

        Scenario scenario = load_scenario(scenario_path, seed_set ? &seed : nullptr);

        if (boot->parsed()) {
            SystemState state(scenario);
            std::cout << state.boot_summary();
        } else if (program->parsed()) {
            auto state = boot_and(scenario, false, false);
            std::string name = program_arg.empty() ? scenario.firmware_name : program_arg;
            ProgramStatus status = state->program(name);
            std::cout << state->guest_log().back() << "\n";
            if (status != ProgramStatus::Ok)
                return 1;
        } else if (overlay->parsed()) {
            auto state = boot_and(scenario, true, false);
            auto path = overlay_arg.empty() ? scenario.overlay
                                            : std::filesystem::path(overlay_arg);
            auto enabled = state->apply_overlay_file(path);
            if (enabled.empty())
                std::cout << "no devices enabled\n";
            for (const std::string& node : enabled)
                std::cout << "enabled " << node << "\n";
        } else if (bench->parsed()) {
            auto state = boot_and(scenario, true, true);
            auto records = state->bench(out_dir);
            std::cout << emit_report_markdown(records);
            std::cout << "reports written to " << out_dir << "\n";
        } else if (selftest->parsed()) {
            return run_selftest(scenario, std::cout);
        }
    } catch (const Error& e) {
        std::cerr << "vfpga-sim: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "vfpga-sim: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

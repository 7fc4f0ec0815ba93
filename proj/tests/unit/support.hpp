// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "vfpga/bitstream.hpp"

namespace vfpga::test {

/// Deterministic helper RNG for generators.
class TestRng {
public:
    explicit TestRng(uint64_t seed) : eng_(seed) {}

    uint64_t below(uint64_t n) { return eng_() % n; } // n > 0
    uint64_t in(uint64_t lo, uint64_t hi) { return lo + below(hi - lo + 1); }
    bool chance(double p) { return static_cast<double>(eng_()) / 1.8446744073709552e19 < p; }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

inline BitstreamImage golden_cdma_image() {
    BitstreamImage image;
    image.region_id = 0;
    image.compatible = "vos,sim-fabric";
    DeviceRecord rec;
    rec.name = "cdma0";
    rec.dev_type = DeviceType::Cdma;
    rec.reg_base = 0xA0000000;
    rec.reg_size = 0x1000;
    rec.irq_line = 4;
    image.records.push_back(rec);
    image.payload.resize(10000);
    uint32_t state = 0xC0FFEE;
    for (std::byte& b : image.payload) {
        state = state * 1664525u + 1013904223u;
        b = std::byte{static_cast<uint8_t>(state >> 24)};
    }
    return image;
}

/// A scratch directory under the system temp root, wiped on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("vfpga_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter_++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    static inline int counter_ = 0;
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary);
    file << text;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::ofstream file(path, std::ios::binary);
    file.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
}

inline const char* demo_base_dts() {
    return R"(/dts-v1/;
/ {
    compatible = "vos,sim-virt";
    axi {
        compatible = "simple-bus";
        cdma@a0000000 {
            compatible = "generic-vfio-candidate";
            reg = <0xa0000000 0x1000>;
            interrupts = <4>;
            status = "disabled";
        };
    };
};
)";
}

inline const char* demo_overlay_dtso() {
    return R"(/dts-v1/;
/plugin/;
/ {
    fragment@0 {
        target-path = "/axi/cdma@a0000000";
        __overlay__ {
            status = "okay";
            compatible = "vos,sim-cdma";
        };
    };
};
)";
}

/// Materializes a complete demo workspace (tree, overlay, firmware,
/// scenario) and returns the scenario file path.
inline std::filesystem::path write_demo_workspace(const TempDir& dir, uint32_t iterations = 4,
                                                  uint64_t seed = 1) {
    const auto& root = dir.path();
    std::filesystem::create_directories(root / "firmware");
    write_file(root / "base.dts", demo_base_dts());
    write_file(root / "enable_cdma.dtso", demo_overlay_dtso());
    write_file(root / "firmware" / "cdma_demo.vfpb", encode_image(golden_cdma_image()));

    std::string scenario = R"({
  "base_dts": "base.dts",
  "overlay": "enable_cdma.dtso",
  "firmware_dir": "firmware",
  "firmware_name": "cdma_demo.vfpb",
  "seed": )" + std::to_string(seed) +
                           R"(,
  "bench": { "iterations": )" + std::to_string(iterations) +
                           R"( }
})";
    write_file(root / "scenario.json", scenario);
    return root / "scenario.json";
}

} // namespace vfpga::test

// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vfpga/system.hpp"

namespace py = pybind11;
using namespace vfpga;

namespace {

py::bytes encode_image_py(const BitstreamImage& image) {
    auto bytes = encode_image(image);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

BitstreamImage decode_image_py(const py::bytes& data) {
    std::string_view view = data;
    return decode_image(std::as_bytes(std::span(view.data(), view.size())));
}

} // namespace

PYBIND11_MODULE(_vfpga, m) {
    m.doc() = "Simulated Virtio-FPGA stack: firmware containers, device-tree "
              "overlays, IOMMU passthrough, and the DMA benchmark harness.";

    py::register_exception<Error>(m, "VfpgaError");

    py::enum_<DeviceType>(m, "DeviceType")
        .value("NONE", DeviceType::None)
        .value("CDMA", DeviceType::Cdma)
        .value("GPIO", DeviceType::Gpio);

    py::class_<DeviceRecord>(m, "DeviceRecord")
        .def(py::init<>())
        .def_readwrite("name", &DeviceRecord::name)
        .def_readwrite("dev_type", &DeviceRecord::dev_type)
        .def_readwrite("reg_base", &DeviceRecord::reg_base)
        .def_readwrite("reg_size", &DeviceRecord::reg_size)
        .def_readwrite("irq_line", &DeviceRecord::irq_line)
        .def("__eq__", [](const DeviceRecord& a, const DeviceRecord& b) { return a == b; });

    py::class_<BitstreamImage>(m, "BitstreamImage")
        .def(py::init<>())
        .def_readwrite("region_id", &BitstreamImage::region_id)
        .def_readwrite("compatible", &BitstreamImage::compatible)
        .def_readwrite("records", &BitstreamImage::records)
        .def_property(
            "payload",
            [](const BitstreamImage& img) {
                return py::bytes(reinterpret_cast<const char*>(img.payload.data()),
                                 img.payload.size());
            },
            [](BitstreamImage& img, const py::bytes& data) {
                std::string_view view = data;
                img.payload.assign(reinterpret_cast<const std::byte*>(view.data()),
                                   reinterpret_cast<const std::byte*>(view.data() + view.size()));
            })
        .def("__eq__",
             [](const BitstreamImage& a, const BitstreamImage& b) { return a == b; });

    m.def("encode_image", &encode_image_py, py::arg("image"));
    m.def("decode_image", &decode_image_py, py::arg("data"));
    m.def("crc32_ieee", [](const py::bytes& data) {
        std::string_view view = data;
        return crc32_ieee(std::as_bytes(std::span(view.data(), view.size())));
    });

    m.def("parse_dts_roundtrip",
          [](const std::string& text) { return serialize_dts(parse_dts(text)); },
          "Parse DTS text and return its canonical serialized form.");

    py::enum_<Env>(m, "Env").value("HOST", Env::Host).value("GUEST", Env::Guest);
    py::enum_<DmaMode>(m, "DmaMode")
        .value("INTERRUPT", DmaMode::Interrupt)
        .value("POLLED", DmaMode::Polled);

    py::enum_<ProgramStatus>(m, "ProgramStatus")
        .value("OK", ProgramStatus::Ok)
        .value("ENOENT", ProgramStatus::FileNotFound)
        .value("EIO", ProgramStatus::IoError)
        .value("EINVAL", ProgramStatus::InvalidImage);

    py::class_<XferParams>(m, "XferParams")
        .def_readonly("fixed_us", &XferParams::fixed_us)
        .def_readonly("virt_us", &XferParams::virt_us);

    py::class_<TimeModel>(m, "TimeModel")
        .def_static("builtin", &TimeModel::builtin, py::arg("seed") = TimeModel::kDefaultSeed)
        .def("without_jitter", &TimeModel::without_jitter)
        .def("prep_us", &TimeModel::prep_us)
        .def("transfer_us", &TimeModel::transfer_us)
        .def("to_json", &TimeModel::to_json)
        .def_static("from_json", &TimeModel::from_json)
        .def_readwrite("bandwidth_bytes_per_us", &TimeModel::bandwidth_bytes_per_us)
        .def_readwrite("seed", &TimeModel::rng_seed);

    py::class_<BenchRecord>(m, "BenchRecord")
        .def_readonly("env", &BenchRecord::env)
        .def_readonly("mode", &BenchRecord::mode)
        .def_readonly("pages", &BenchRecord::pages)
        .def_readonly("prep_mean_us", &BenchRecord::prep_mean_us)
        .def_readonly("prep_std_us", &BenchRecord::prep_std_us)
        .def_readonly("xfer_mean_us", &BenchRecord::xfer_mean_us)
        .def_readonly("xfer_std_us", &BenchRecord::xfer_std_us)
        .def("__repr__", [](const BenchRecord& r) {
            return std::string("<BenchRecord ") + env_name(r.env) + "/" +
                   dma_mode_name(r.mode) + " pages=" + std::to_string(r.pages) + ">";
        });

    m.def("compute_overhead_pct", &compute_overhead_pct);
    m.def("emit_report_csv",
          [](const std::vector<BenchRecord>& r) { return emit_report_csv(r); });
    m.def("emit_report_markdown",
          [](const std::vector<BenchRecord>& r) { return emit_report_markdown(r); });
    m.def("emit_overhead_csv",
          [](const std::vector<BenchRecord>& r) { return emit_overhead_csv(r); });

    py::class_<Scenario>(m, "Scenario")
        .def_static("load", &Scenario::load, py::arg("path"))
        .def_readwrite("firmware_name", &Scenario::firmware_name)
        .def_readwrite("seed", &Scenario::seed)
        .def_property(
            "iterations", [](const Scenario& s) { return s.bench.iterations; },
            [](Scenario& s, uint32_t n) { s.bench.iterations = n; })
        .def_property(
            "sizes", [](const Scenario& s) { return s.bench.sizes; },
            [](Scenario& s, std::vector<uint32_t> sizes) { s.bench.sizes = std::move(sizes); });

    py::class_<SystemState>(m, "SystemState")
        .def(py::init<Scenario>(), py::arg("scenario"))
        .def("boot_summary", &SystemState::boot_summary)
        .def("program", &SystemState::program, py::arg("firmware_name"))
        .def("apply_overlay_file", &SystemState::apply_overlay_file, py::arg("overlay_path"))
        .def("bench", &SystemState::bench, py::arg("out_dir"))
        .def("bench_records", &SystemState::bench_records)
        .def_property_readonly("guest_log", &SystemState::guest_log)
        .def_property_readonly("device_enabled", [](const SystemState& s) {
            std::map<std::string, bool> out;
            for (const VfioDevice& dev : s.devices())
                out[dev.node_path()] = dev.enabled();
            return out;
        });

    m.def(
        "selftest",
        [](const Scenario& scenario) {
            std::ostringstream out;
            int rc = run_selftest(scenario, out);
            return py::make_tuple(rc, out.str());
        },
        py::arg("scenario"), "Run the built-in checks; returns (exit_code, report_text).");
}

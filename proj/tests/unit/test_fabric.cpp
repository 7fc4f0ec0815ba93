// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>

#include "support.hpp"
#include "vfpga/fabric.hpp"

using namespace vfpga;
using vfpga::test::TestRng;

namespace {

struct Rig {
    GuestMemory ddr{0x40000000, 0x400000};
    SimClock clock;
    FabricRegion region{0, ddr};
    IommuContainer container = IommuContainer::on_demand();

    CdmaDevice& cdma() {
        CdmaDevice* dev = region.find_cdma();
        REQUIRE(dev);
        return *dev;
    }

    void configure_golden() { region.configure(vfpga::test::golden_cdma_image()); }

    void map_linear(uint64_t iova, uint64_t pa, uint64_t len) {
        container.map(iova, pa, len, Perm::RW);
    }

    void fill(uint64_t pa, uint64_t len, uint8_t salt) {
        auto view = ddr.view(pa, len);
        for (uint64_t i = 0; i < len; ++i)
            view[i] = std::byte{static_cast<uint8_t>(salt + i * 7)};
    }
};

} // namespace

TEST_CASE("configuring the golden image instantiates one CDMA device") {
    Rig rig;
    rig.configure_golden();
    REQUIRE(rig.region.devices().size() == 1);
    CHECK(rig.region.devices()[0]->type() == DeviceType::Cdma);
    CHECK(rig.region.devices()[0]->record().reg_base == 0xA0000000);
    CHECK(rig.region.configured());
}

TEST_CASE("region id mismatches are rejected and leave the region untouched") {
    Rig rig;
    rig.configure_golden();

    BitstreamImage other = vfpga::test::golden_cdma_image();
    other.region_id = 2;
    CHECK_THROWS_WITH_AS(rig.region.configure(other), doctest::Contains("RegionMismatch"),
                         Error);
    CHECK(rig.region.devices().size() == 1);
    CHECK(rig.region.image()->region_id == 0);
}

TEST_CASE("NONE records are skipped; unknown types are rejected atomically") {
    Rig rig;
    BitstreamImage image = vfpga::test::golden_cdma_image();
    DeviceRecord filler;
    filler.name = "filler";
    filler.dev_type = DeviceType::None;
    filler.reg_base = 0xB0000000;
    filler.reg_size = 0x100;
    image.records.push_back(filler);

    rig.region.configure(image);
    CHECK(rig.region.devices().size() == 1); // the NONE record adds nothing

    // A hand-built record with a bogus type never comes from decode, but the
    // fabric still refuses it without clobbering the current configuration.
    BitstreamImage bogus = image;
    bogus.records[0].dev_type = static_cast<DeviceType>(7);
    CHECK_THROWS_WITH_AS(rig.region.configure(bogus),
                         doctest::Contains("UnsupportedDeviceType"), Error);
    CHECK(rig.region.devices().size() == 1);
    CHECK(rig.region.live_records()[0].name == "cdma0");
}

TEST_CASE("a transfer copies bytes exactly and charges the cost model") {
    Rig rig;
    rig.configure_golden();
    rig.cdma().set_cost_model([](DmaMode, uint64_t len) { return 10.0 + len / 100.0; });

    uint64_t src_pa = 0x40000000, dst_pa = 0x40100000;
    rig.map_linear(0x1000, src_pa, 0x1000);
    rig.map_linear(0x9000, dst_pa, 0x1000);
    rig.fill(src_pa, 0x1000, 3);
    rig.fill(dst_pa, 0x1000, 200);

    DmaTransfer xfer{0x1000, 0x9000, 0x1000, DmaMode::Interrupt};
    DmaHandle handle = rig.cdma().submit(rig.container, xfer, rig.clock);
    CHECK(rig.cdma().busy());
    CHECK(handle.completion_time_us() == doctest::Approx(10.0 + 4096.0 / 100.0));

    CHECK(rig.cdma().wait(handle, rig.clock) == DmaStatus::Ok);
    CHECK_FALSE(rig.cdma().busy());
    CHECK(rig.clock.now_us() == doctest::Approx(10.0 + 40.96));

    auto src = rig.ddr.view(src_pa, 0x1000);
    auto dst = rig.ddr.view(dst_pa, 0x1000);
    CHECK(std::memcmp(src.data(), dst.data(), 0x1000) == 0);
}

TEST_CASE("bytes outside the destination range stay untouched") {
    Rig rig;
    rig.configure_golden();
    uint64_t src_pa = 0x40000000, dst_pa = 0x40100000;
    rig.map_linear(0x1000, src_pa, 0x2000);
    rig.map_linear(0x9000, dst_pa - 0x10, 0x2000); // dst mapping starts before the range
    rig.fill(src_pa, 0x1000, 1);
    rig.fill(dst_pa - 0x10, 0x2000, 77);
    std::vector<std::byte> before(rig.ddr.view(dst_pa - 0x10, 0x2000).begin(),
                                  rig.ddr.view(dst_pa - 0x10, 0x2000).end());

    DmaTransfer xfer{0x1000, 0x9010, 0x1000, DmaMode::Polled};
    DmaHandle handle = rig.cdma().submit(rig.container, xfer, rig.clock);
    rig.cdma().wait(handle, rig.clock);

    // [dst_pa, dst_pa+0x1000) now equals the source; all other bytes of the
    // mapping are exactly as before.
    CHECK(std::memcmp(rig.ddr.view(dst_pa, 0x1000).data(), rig.ddr.view(src_pa, 0x1000).data(),
                      0x1000) == 0);
    CHECK(std::memcmp(rig.ddr.view(dst_pa - 0x10, 0x10).data(), before.data(), 0x10) == 0);
    CHECK(std::memcmp(rig.ddr.view(dst_pa + 0x1000, 0xFF0).data(), before.data() + 0x1010,
                      0xFF0) == 0);
}

TEST_CASE("unmapped pages fault without touching the destination") {
    Rig rig;
    rig.configure_golden();
    uint64_t src_pa = 0x40000000, dst_pa = 0x40100000;
    rig.fill(dst_pa, 0x2000, 42);
    std::vector<std::byte> before(rig.ddr.view(dst_pa, 0x2000).begin(),
                                  rig.ddr.view(dst_pa, 0x2000).end());

    SUBCASE("destination entirely unmapped") {
        rig.map_linear(0x1000, src_pa, 0x1000);
        DmaTransfer xfer{0x1000, 0x9000, 0x1000, DmaMode::Interrupt};
        DmaHandle handle = rig.cdma().submit(rig.container, xfer, rig.clock);
        CHECK(handle.transfer().result == DmaStatus::Fault);
        CHECK(rig.cdma().wait(handle, rig.clock) == DmaStatus::Fault);
    }
    SUBCASE("second destination page missing") {
        rig.map_linear(0x1000, src_pa, 0x2000);
        rig.map_linear(0x9000, dst_pa, 0x1000); // covers only the first page
        DmaTransfer xfer{0x1000, 0x9000, 0x2000, DmaMode::Polled};
        DmaHandle handle = rig.cdma().submit(rig.container, xfer, rig.clock);
        CHECK(rig.cdma().wait(handle, rig.clock) == DmaStatus::Fault);
    }
    SUBCASE("source hole straddling a mapping seam") {
        rig.map_linear(0x1000, src_pa, 0x800); // first half page only
        rig.map_linear(0x9000, dst_pa, 0x1000);
        DmaTransfer xfer{0x1000, 0x9000, 0x1000, DmaMode::Interrupt};
        DmaHandle handle = rig.cdma().submit(rig.container, xfer, rig.clock);
        CHECK(rig.cdma().wait(handle, rig.clock) == DmaStatus::Fault);
    }

    CHECK(std::memcmp(rig.ddr.view(dst_pa, 0x2000).data(), before.data(), 0x2000) == 0);
    CHECK_FALSE(rig.cdma().busy());
    CHECK(rig.clock.now_us() == 0.0); // faults charge nothing
}

TEST_CASE("transfer validation") {
    Rig rig;
    rig.configure_golden();
    rig.map_linear(0x1000, 0x40000000, 0x2000);

    DmaTransfer odd{0x1000, 0x1800, 6, DmaMode::Polled};
    CHECK_THROWS_WITH_AS(rig.cdma().submit(rig.container, odd, rig.clock),
                         doctest::Contains("InvalidTransfer"), Error);

    DmaTransfer overlapping{0x1000, 0x1800, 0x1000, DmaMode::Polled};
    CHECK_THROWS_AS(rig.cdma().submit(rig.container, overlapping, rig.clock), Error);
}

TEST_CASE("a second submit while busy is rejected and harmless") {
    Rig rig;
    rig.configure_golden();
    rig.cdma().set_cost_model([](DmaMode, uint64_t) { return 5.0; });
    uint64_t src_pa = 0x40000000, dst_pa = 0x40100000;
    rig.map_linear(0x1000, src_pa, 0x1000);
    rig.map_linear(0x9000, dst_pa, 0x1000);
    rig.fill(src_pa, 0x1000, 9);

    DmaTransfer xfer{0x1000, 0x9000, 0x1000, DmaMode::Interrupt};
    DmaHandle first = rig.cdma().submit(rig.container, xfer, rig.clock);
    CHECK_THROWS_WITH_AS(rig.cdma().submit(rig.container, xfer, rig.clock),
                         doctest::Contains("Busy"), Error);

    CHECK(rig.cdma().wait(first, rig.clock) == DmaStatus::Ok);
    CHECK(std::memcmp(rig.ddr.view(dst_pa, 0x1000).data(), rig.ddr.view(src_pa, 0x1000).data(),
                      0x1000) == 0);
}

TEST_CASE("interrupt waits sleep to completion; polled waits pay per poll") {
    Rig rig;
    rig.configure_golden();
    uint64_t src_pa = 0x40000000, dst_pa = 0x40100000;
    rig.map_linear(0x1000, src_pa, 0x1000);
    rig.map_linear(0x9000, dst_pa, 0x1000);
    rig.cdma().set_cost_model([](DmaMode, uint64_t) { return 1.23; });

    int irqs = 0;
    rig.cdma().set_irq_handler([&](const DmaTransfer& t) {
        CHECK(t.result == DmaStatus::Ok);
        ++irqs;
    });

    SUBCASE("interrupt mode fires the handler at the exact completion time") {
        DmaTransfer xfer{0x1000, 0x9000, 0x1000, DmaMode::Interrupt};
        DmaHandle handle = rig.cdma().submit(rig.container, xfer, rig.clock);
        rig.cdma().wait(handle, rig.clock);
        CHECK(irqs == 1);
        CHECK(rig.clock.now_us() == doctest::Approx(1.23));
    }
    SUBCASE("polled mode rounds up to the poll grid and skips the irq") {
        DmaTransfer xfer{0x1000, 0x9000, 0x1000, DmaMode::Polled};
        DmaHandle handle = rig.cdma().submit(rig.container, xfer, rig.clock);
        rig.cdma().wait(handle, rig.clock);
        CHECK(irqs == 0);
        CHECK(rig.clock.now_us() == doctest::Approx(1.3)); // 13 polls at 0.1 us
    }
}

TEST_CASE("enable_device enforces the full contract") {
    GuestMemory ddr(0x40000000, 0x100000);
    FabricRegion region(0, ddr);
    DtNode base = parse_dts(vfpga::test::demo_base_dts());
    DtNode enabled_tree = base;
    enabled_tree.find_path("/axi/cdma@a0000000")->set_prop("status",
                                                           PropValue::string("okay"));

    SUBCASE("node still disabled") {
        VfioDevice dev = VfioDevice::create_passthrough(base, "/axi/cdma@a0000000");
        region.configure(vfpga::test::golden_cdma_image());
        CHECK_THROWS_WITH_AS(enable_device(dev, region, base),
                             doctest::Contains("StillDisabled"), Error);
        CHECK_FALSE(dev.enabled());
    }
    SUBCASE("fabric not configured") {
        VfioDevice dev = VfioDevice::create_passthrough(base, "/axi/cdma@a0000000");
        CHECK_THROWS_WITH_AS(enable_device(dev, region, enabled_tree),
                             doctest::Contains("NotConfigured"), Error);
    }
    SUBCASE("record disagrees with the frozen guard") {
        VfioDevice dev = VfioDevice::create_passthrough(base, "/axi/cdma@a0000000");
        BitstreamImage image = vfpga::test::golden_cdma_image();
        image.records[0].irq_line = 9;
        region.configure(image);
        CHECK_THROWS_WITH_AS(enable_device(dev, region, enabled_tree),
                             doctest::Contains("GuardMismatch"), Error);
        CHECK_FALSE(dev.enabled());
    }
    SUBCASE("matching record enables the device") {
        VfioDevice dev = VfioDevice::create_passthrough(base, "/axi/cdma@a0000000");
        region.configure(vfpga::test::golden_cdma_image());
        enable_device(dev, region, enabled_tree);
        CHECK(dev.enabled());
    }
}

TEST_CASE("property: mismatched firmware never yields an enabled device") {
    GuestMemory ddr(0x40000000, 0x100000);
    DtNode base = parse_dts(vfpga::test::demo_base_dts());
    DtNode okay_tree = base;
    okay_tree.find_path("/axi/cdma@a0000000")->set_prop("status", PropValue::string("okay"));

    TestRng rng(5150);
    int enabled_count = 0;
    for (int i = 0; i < 1000; ++i) {
        BitstreamImage image = vfpga::test::golden_cdma_image();
        DeviceRecord& rec = image.records[0];
        // Mutate at least one frozen property.
        bool mutated = false;
        if (rng.chance(0.5)) {
            rec.reg_base += (rng.below(8) + 1) * 0x1000;
            mutated = true;
        }
        if (rng.chance(0.5)) {
            rec.reg_size += (rng.below(4) + 1) * 0x100;
            mutated = true;
        }
        if (!mutated || rng.chance(0.3)) {
            rec.irq_line = static_cast<uint16_t>(5 + rng.below(20));
        }

        FabricRegion region(0, ddr);
        region.configure(image);
        VfioDevice dev = VfioDevice::create_passthrough(base, "/axi/cdma@a0000000");
        try {
            enable_device(dev, region, okay_tree);
        } catch (const Error& e) {
            bool expected =
                e.code() == Errc::NotConfigured || e.code() == Errc::GuardMismatch;
            REQUIRE(expected);
        }
        if (dev.enabled())
            ++enabled_count;
    }
    CHECK(enabled_count == 0);
}

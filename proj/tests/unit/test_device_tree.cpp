// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "support.hpp"
#include "vfpga/device_tree.hpp"

using namespace vfpga;
using vfpga::test::TestRng;

namespace {

DtNode generate_tree(TestRng& rng, int depth = 0);

PropValue generate_value(TestRng& rng) {
    switch (rng.below(4)) {
    case 0:
        return PropValue::empty();
    case 1: {
        std::string s;
        for (uint64_t i = rng.below(12); i > 0; --i)
            s.push_back(static_cast<char>('a' + rng.below(26)));
        return PropValue::string(std::move(s));
    }
    case 2: {
        std::vector<uint32_t> cells;
        for (uint64_t i = rng.below(6); i > 0; --i)
            cells.push_back(static_cast<uint32_t>(rng.below(0x100000000ull)));
        return PropValue::cells(std::move(cells));
    }
    default: {
        std::vector<std::byte> bytes;
        for (uint64_t i = rng.below(8); i > 0; --i)
            bytes.push_back(std::byte{static_cast<uint8_t>(rng.below(256))});
        return PropValue::bytes(std::move(bytes));
    }
    }
}

std::string generate_name(TestRng& rng) {
    static const char chars[] = "abcdefghijklmnopqrstuvwxyz0123456789,._+-";
    std::string name;
    name.push_back(static_cast<char>('a' + rng.below(26)));
    for (uint64_t i = rng.below(10); i > 0; --i)
        name.push_back(chars[rng.below(sizeof chars - 1)]);
    return name;
}

DtNode generate_tree(TestRng& rng, int depth) {
    DtNode node;
    node.name = depth == 0 ? "/" : generate_name(rng);
    if (depth > 0 && rng.chance(0.3))
        node.name += "@" + std::to_string(rng.below(0x10000));

    for (uint64_t i = rng.below(5); i > 0; --i) {
        std::string prop = generate_name(rng);
        if (!node.find_prop(prop))
            node.props.push_back({std::move(prop), generate_value(rng)});
    }
    if (depth < 3) {
        for (uint64_t i = rng.below(static_cast<uint64_t>(4 - depth)); i > 0; --i) {
            DtNode child = generate_tree(rng, depth + 1);
            if (!node.find_child(child.name))
                node.children.push_back(std::move(child));
        }
    }
    return node;
}

} // namespace

TEST_CASE("the bus example parses into the expected shape") {
    DtNode root = parse_dts(
        R"(/ { axi { cdma@a0000000 { reg = <0xa0000000 0x1000>; status = "disabled"; }; }; };)");
    CHECK(root.name == "/");
    REQUIRE(root.children.size() == 1);
    const DtNode* cdma = root.find_path("/axi/cdma@a0000000");
    REQUIRE(cdma);
    CHECK(cdma->status_is("disabled"));
    const PropValue* reg = cdma->find_prop("reg");
    REQUIRE(reg);
    REQUIRE(reg->is_cells());
    CHECK(reg->cells() == std::vector<uint32_t>{0xa0000000, 0x1000});
}

TEST_CASE("value forms parse and line comments are skipped") {
    DtNode root = parse_dts(R"(// leading comment
/ {
    model = "sim"; // trailing comment
    cells = <1 2 0xff 4000000000>;
    blob = [de ad be ef];
    marker;
};
)");
    CHECK(root.find_prop("model")->str() == "sim");
    CHECK(root.find_prop("cells")->cells() == std::vector<uint32_t>{1, 2, 255, 4000000000u});
    CHECK(root.find_prop("blob")->bytes().size() == 4);
    CHECK(root.find_prop("marker")->is_empty());
}

TEST_CASE("parse failures carry a position") {
    CHECK_THROWS_WITH_AS(parse_dts(""), doctest::Contains("root node"), Error);
    CHECK_THROWS_WITH_AS(parse_dts("/ { reg = <0x1g>; };"), doctest::Contains("BadCell"),
                         Error);
    CHECK_THROWS_WITH_AS(parse_dts("/ { a { }; a { }; };"), doctest::Contains("DuplicateNode"),
                         Error);
    CHECK_THROWS_AS(parse_dts("/ { x = \"a\"; x = \"b\"; };"), Error); // duplicate property
    CHECK_THROWS_AS(parse_dts("/ { status = \"maybe\"; };"), Error);
    CHECK_THROWS_AS(parse_dts("/ { cells = <0x100000000>; };"), Error); // > 32 bits
    CHECK_THROWS_AS(parse_dts("/ { unterminated = \"abc; };"), Error);

    try {
        parse_dts("/ {\n  bad = <0x1g>;\n};");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.code() == Errc::BadCell);
        CHECK(e.line() == 2);
        CHECK(e.column() > 1);
    }
}

TEST_CASE("serialize then parse is a fixed point") {
    TestRng rng(1234);
    for (int i = 0; i < 300; ++i) {
        DtNode tree = generate_tree(rng);
        std::string text = serialize_dts(tree);
        DtNode reparsed = parse_dts(text);
        REQUIRE(reparsed == tree);
        CHECK(serialize_dts(reparsed) == text);
    }
}

TEST_CASE("overlay parsing enforces the plugin marker and fragment shape") {
    CHECK_THROWS_WITH_AS(parse_overlay("/ { };"), doctest::Contains("MissingPluginMarker"),
                         Error);
    CHECK_THROWS_WITH_AS(
        parse_overlay(
            R"(/plugin/; / { fragment@0 { target-path = "axi"; __overlay__ { }; }; };)"),
        doctest::Contains("RelativeTarget"), Error);
    CHECK_THROWS_AS(
        parse_overlay(R"(/plugin/; / { notafragment { target-path = "/"; __overlay__ { }; }; };)"),
        Error);
    CHECK_THROWS_AS(parse_overlay(R"(/plugin/; / { fragment@0 { __overlay__ { }; }; };)"),
                    Error);

    Overlay overlay = parse_overlay(vfpga::test::demo_overlay_dtso());
    REQUIRE(overlay.fragments.size() == 1);
    CHECK(overlay.fragments[0].target_path == "/axi/cdma@a0000000");
    CHECK(overlay.fragments[0].content.find_prop("status")->str() == "okay");
}

TEST_CASE("applying the enable overlay flips the candidate node") {
    DtNode base = parse_dts(vfpga::test::demo_base_dts());
    Overlay overlay = parse_overlay(vfpga::test::demo_overlay_dtso());
    DtNode base_copy = base;

    GuardMap guards;
    guards.emplace("/axi/cdma@a0000000",
                   BasePropertyGuard::from_node(*base.find_path("/axi/cdma@a0000000")));

    DtNode updated = apply_overlay(base, overlay, guards);
    CHECK(updated.find_path("/axi/cdma@a0000000")->status_is("okay"));
    CHECK(updated.find_path("/axi/cdma@a0000000")->find_prop("compatible")->str() ==
          "vos,sim-cdma");

    // Purity: the input tree is untouched and the operation is repeatable.
    CHECK(base == base_copy);
    CHECK(apply_overlay(base, overlay, guards) == updated);
    // reg survived unchanged.
    CHECK(updated.find_path("/axi/cdma@a0000000")->find_prop("reg")->cells() ==
          std::vector<uint32_t>{0xa0000000, 0x1000});
}

TEST_CASE("overlay targets must resolve") {
    DtNode base = parse_dts(vfpga::test::demo_base_dts());
    Overlay overlay = parse_overlay(
        R"(/plugin/; / { fragment@0 { target-path = "/nonexistent"; __overlay__ { status = "okay"; }; }; };)");
    CHECK_THROWS_WITH_AS(apply_overlay(base, overlay, {}), doctest::Contains("TargetNotFound"),
                         Error);
}

TEST_CASE("guarded properties cannot be altered") {
    DtNode base = parse_dts(vfpga::test::demo_base_dts());
    GuardMap guards;
    guards.emplace("/axi/cdma@a0000000",
                   BasePropertyGuard::from_node(*base.find_path("/axi/cdma@a0000000")));

    SUBCASE("changing reg directly") {
        Overlay overlay = parse_overlay(
            R"(/plugin/; / { fragment@0 { target-path = "/axi/cdma@a0000000"; __overlay__ { reg = <0xb0000000 0x1000>; }; }; };)");
        CHECK_THROWS_WITH_AS(apply_overlay(base, overlay, guards),
                             doctest::Contains("GuardViolation"), Error);
    }
    SUBCASE("changing interrupts via an ancestor fragment") {
        Overlay overlay = parse_overlay(
            R"(/plugin/; / { fragment@0 { target-path = "/axi"; __overlay__ { cdma@a0000000 { interrupts = <9>; }; }; }; };)");
        CHECK_THROWS_AS(apply_overlay(base, overlay, guards), Error);
    }
    SUBCASE("rewriting reg with the identical value is a no-op") {
        Overlay overlay = parse_overlay(
            R"(/plugin/; / { fragment@0 { target-path = "/axi/cdma@a0000000"; __overlay__ { reg = <0xa0000000 0x1000>; status = "okay"; }; }; };)");
        DtNode updated = apply_overlay(base, overlay, guards);
        CHECK(updated.find_path("/axi/cdma@a0000000")->status_is("okay"));
    }
}

TEST_CASE("property: no overlay sequence can change guarded reg or interrupts") {
    DtNode base = parse_dts(vfpga::test::demo_base_dts());
    const std::string path = "/axi/cdma@a0000000";
    GuardMap guards;
    guards.emplace(path, BasePropertyGuard::from_node(*base.find_path(path)));
    const auto frozen_reg = base.find_path(path)->find_prop("reg")->cells();
    const auto frozen_irq = base.find_path(path)->find_prop("interrupts")->cells();

    TestRng rng(99);
    DtNode current = base;
    for (int i = 0; i < 1000; ++i) {
        Overlay overlay;
        DtNode content;
        content.name = "__overlay__";
        std::string prop = rng.chance(0.5) ? "reg" : "interrupts";
        std::vector<uint32_t> cells;
        for (uint64_t j = rng.in(1, 4); j > 0; --j)
            cells.push_back(static_cast<uint32_t>(rng.below(0x100000000ull)));
        content.props.push_back({prop, PropValue::cells(std::move(cells))});
        if (rng.chance(0.3))
            content.props.push_back({"status", PropValue::string("okay")});
        overlay.fragments.push_back({path, std::move(content)});

        try {
            current = apply_overlay(current, overlay, guards);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::GuardViolation);
        }
        REQUIRE(current.find_path(path)->find_prop("reg")->cells() == frozen_reg);
        REQUIRE(current.find_path(path)->find_prop("interrupts")->cells() == frozen_irq);
    }
}

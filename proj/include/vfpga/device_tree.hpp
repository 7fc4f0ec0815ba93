// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vfpga/errors.hpp"

namespace vfpga {

/// Property value: empty marker, string, 32-bit cell list, or byte array.
class PropValue {
public:
    PropValue() : value_(Empty{}) {}

    static PropValue empty() { return PropValue(); }
    static PropValue string(std::string s) { return PropValue(std::move(s)); }
    static PropValue cells(std::vector<uint32_t> c) { return PropValue(std::move(c)); }
    static PropValue bytes(std::vector<std::byte> b) { return PropValue(std::move(b)); }

    bool is_empty() const { return std::holds_alternative<Empty>(value_); }
    bool is_string() const { return std::holds_alternative<std::string>(value_); }
    bool is_cells() const { return std::holds_alternative<std::vector<uint32_t>>(value_); }
    bool is_bytes() const { return std::holds_alternative<std::vector<std::byte>>(value_); }

    const std::string& str() const { return std::get<std::string>(value_); }
    const std::vector<uint32_t>& cells() const { return std::get<std::vector<uint32_t>>(value_); }
    const std::vector<std::byte>& bytes() const { return std::get<std::vector<std::byte>>(value_); }

    bool operator==(const PropValue&) const = default;

private:
    struct Empty {
        bool operator==(const Empty&) const = default;
    };
    explicit PropValue(std::string s) : value_(std::move(s)) {}
    explicit PropValue(std::vector<uint32_t> c) : value_(std::move(c)) {}
    explicit PropValue(std::vector<std::byte> b) : value_(std::move(b)) {}

    std::variant<Empty, std::string, std::vector<uint32_t>, std::vector<std::byte>> value_;
};

struct DtProperty {
    std::string name;
    PropValue value;

    bool operator==(const DtProperty&) const = default;
};

/// A device-tree node. Property and child order is preserved; names are
/// unique within their kind.
struct DtNode {
    std::string name; // "name" or "name@unitaddr"; "/" for the root
    std::vector<DtProperty> props;
    std::vector<DtNode> children;

    const PropValue* find_prop(std::string_view name) const;
    void set_prop(std::string_view name, PropValue value); // replace or append

    DtNode* find_child(std::string_view name);
    const DtNode* find_child(std::string_view name) const;

    /// Resolves an absolute path like "/axi/cdma@a0000000". "/" is the root.
    const DtNode* find_path(std::string_view path) const;
    DtNode* find_path(std::string_view path);

    bool status_is(std::string_view value) const;

    bool operator==(const DtNode&) const = default;
};

/// Parses the DTS text subset: nodes `name { ... };`, properties
/// `name = "str";` | `name = <cells>;` | `name = [hexbytes];` | `name;`,
/// `//` line comments. Requires a single root node `/`.
DtNode parse_dts(std::string_view text);

/// Deterministic text form; parse_dts(serialize_dts(t)) is structurally
/// equal to t.
std::string serialize_dts(const DtNode& root);

struct OverlayFragment {
    std::string target_path;
    DtNode content; // the __overlay__ payload: properties to set, children to add
};

struct Overlay {
    std::vector<OverlayFragment> fragments;
};

/// Parses an overlay: a `/plugin/;` marker followed by a root holding
/// `fragment@N { target-path = "/x/y"; __overlay__ { ... }; };` children.
Overlay parse_overlay(std::string_view text);

/// Frozen base properties of a passed-through device node. Once a node is
/// bound to the IOMMU its register windows and interrupt lines may never be
/// changed by later firmware or overlays.
struct BasePropertyGuard {
    std::vector<std::array<uint64_t, 2>> reg; // (base, size) pairs
    std::vector<uint32_t> interrupts;

    /// Freezes reg/interrupts from a node. Throws MissingReg when the node
    /// has no well-formed `reg` property.
    static BasePropertyGuard from_node(const DtNode& node);

    bool operator==(const BasePropertyGuard&) const = default;
};

/// Guarded node paths for overlay validation.
using GuardMap = std::map<std::string, BasePropertyGuard, std::less<>>;

/// Returns a modified copy of `root` with every fragment merged in; the
/// input tree is never touched. Overlay properties replace base properties
/// wholesale; children merge recursively. Any attempt to change `reg` or
/// `interrupts` of a guarded path throws GuardViolation.
DtNode apply_overlay(const DtNode& root, const Overlay& overlay, const GuardMap& guards);

} // namespace vfpga

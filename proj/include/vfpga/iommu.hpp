// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vfpga/device_tree.hpp"
#include "vfpga/errors.hpp"

namespace vfpga {

enum class MapMode {
    OnDemand, // translations created per map() call, the native discipline
    Direct,   // one pre-established window; map() is bookkeeping only
};

enum class Perm : uint8_t {
    R = 1,
    W = 2,
    RW = 3,
};

struct IommuMapping {
    uint64_t iova = 0;
    uint64_t pa = 0;
    uint64_t len = 0;
    Perm perm = Perm::RW;
};

/// IOVA -> PA translation context.
///
/// ON_DEMAND containers install a translation per map() call and count each
/// as a map event. DIRECT containers pre-establish a single window at
/// creation; map()/unmap() only keep accounting so callers can stay
/// symmetric, and the map-event counter never moves.
class IommuContainer {
public:
    static IommuContainer on_demand();
    static IommuContainer direct(uint64_t window_iova, uint64_t window_pa, uint64_t window_len);

    MapMode mode() const noexcept { return mode_; }

    void map(uint64_t iova, uint64_t pa, uint64_t len, Perm perm);
    void unmap(uint64_t iova, uint64_t len);

    /// Translates one IOVA; throws Fault when no translation covers it.
    uint64_t translate(uint64_t iova) const;
    std::optional<uint64_t> try_translate(uint64_t iova) const noexcept;

    /// Number of translation-creating events (IOMMU programming work).
    uint64_t map_events() const noexcept { return map_events_; }
    /// Number of successful map() calls, regardless of mode.
    uint64_t map_calls() const noexcept { return map_calls_; }

    const std::map<uint64_t, IommuMapping>& mappings() const noexcept { return mappings_; }

private:
    explicit IommuContainer(MapMode mode) : mode_(mode) {}

    MapMode mode_;
    std::map<uint64_t, IommuMapping> mappings_; // keyed by iova; non-overlapping
    IommuMapping window_{};                     // DIRECT only
    uint64_t map_events_ = 0;
    uint64_t map_calls_ = 0;
};

/// A candidate FPGA device passed through to the guest. Created disabled,
/// with its base properties frozen; it can only be enabled after the fabric
/// carries a matching device and the tree node was flipped to "okay".
class VfioDevice {
public:
    /// Freezes the guard from the tree node at `node_path`. The node must
    /// exist, carry a reg property, and be disabled.
    static VfioDevice create_passthrough(const DtNode& root, std::string_view node_path);

    const std::string& node_path() const noexcept { return node_path_; }
    const BasePropertyGuard& guard() const noexcept { return guard_; }
    bool enabled() const noexcept { return enabled_; }

    void register_irq_handler(uint32_t line, std::function<void()> handler);
    void raise_irq(uint32_t line) const;

    /// Flips the device to enabled. Internal to the enable flow; use
    /// enable_device() from the fabric API.
    void mark_enabled() noexcept { enabled_ = true; }

private:
    VfioDevice() = default;

    std::string node_path_;
    BasePropertyGuard guard_;
    bool enabled_ = false;
    std::map<uint32_t, std::function<void()>> irq_handlers_;
};

} // namespace vfpga

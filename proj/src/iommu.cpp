// SPDX-License-Identifier: Apache-2.0
#include "vfpga/iommu.hpp"

namespace vfpga {

namespace {

void check_range(uint64_t iova, uint64_t len) {
    if (len == 0)
        throw Error(Errc::InvalidArgument, "zero-length mapping");
    if (iova + len < iova)
        throw Error(Errc::InvalidArgument, "mapping wraps the address space");
}

bool inside(const IommuMapping& m, uint64_t iova, uint64_t len) {
    return len <= m.len && iova >= m.iova && iova - m.iova <= m.len - len;
}

} // namespace

IommuContainer IommuContainer::on_demand() {
    return IommuContainer(MapMode::OnDemand);
}

IommuContainer IommuContainer::direct(uint64_t window_iova, uint64_t window_pa,
                                      uint64_t window_len) {
    check_range(window_iova, window_len);
    IommuContainer c(MapMode::Direct);
    c.window_ = {window_iova, window_pa, window_len, Perm::RW};
    return c;
}

void IommuContainer::map(uint64_t iova, uint64_t pa, uint64_t len, Perm perm) {
    check_range(iova, len);

    if (mode_ == MapMode::Direct) {
        if (!inside(window_, iova, len))
            throw Error(Errc::OutsideDirectWindow, "iova 0x" + std::to_string(iova));
        if (pa != window_.pa + (iova - window_.iova))
            throw Error(Errc::InvalidArgument,
                        "direct mapping must mirror the pre-established window");
        // Bookkeeping only; the window translation already exists.
        if (mappings_.count(iova))
            throw Error(Errc::Overlap, "iova 0x" + std::to_string(iova) + " already tracked");
        mappings_[iova] = {iova, pa, len, perm};
        ++map_calls_;
        return;
    }

    // Reject any IOVA overlap with an existing translation.
    auto next = mappings_.lower_bound(iova);
    if (next != mappings_.end() && next->second.iova < iova + len)
        throw Error(Errc::Overlap, "iova 0x" + std::to_string(iova));
    if (next != mappings_.begin()) {
        const IommuMapping& prev = std::prev(next)->second;
        if (prev.iova + prev.len > iova)
            throw Error(Errc::Overlap, "iova 0x" + std::to_string(iova));
    }

    mappings_[iova] = {iova, pa, len, perm};
    ++map_events_;
    ++map_calls_;
}

void IommuContainer::unmap(uint64_t iova, uint64_t len) {
    auto it = mappings_.find(iova);
    if (it == mappings_.end() || it->second.len != len)
        throw Error(Errc::NotMapped, "iova 0x" + std::to_string(iova));
    mappings_.erase(it);
}

uint64_t IommuContainer::translate(uint64_t iova) const {
    auto pa = try_translate(iova);
    if (!pa)
        throw Error(Errc::Fault, "no translation for iova 0x" + std::to_string(iova));
    return *pa;
}

std::optional<uint64_t> IommuContainer::try_translate(uint64_t iova) const noexcept {
    if (mode_ == MapMode::Direct) {
        if (iova >= window_.iova && iova - window_.iova < window_.len)
            return window_.pa + (iova - window_.iova);
        return std::nullopt;
    }

    auto it = mappings_.upper_bound(iova);
    if (it == mappings_.begin())
        return std::nullopt;
    const IommuMapping& m = std::prev(it)->second;
    if (iova - m.iova < m.len)
        return m.pa + (iova - m.iova);
    return std::nullopt;
}

VfioDevice VfioDevice::create_passthrough(const DtNode& root, std::string_view node_path) {
    const DtNode* node = root.find_path(node_path);
    if (!node)
        throw Error(Errc::NodeNotFound, std::string(node_path));
    if (!node->status_is("disabled"))
        throw Error(Errc::InvalidState,
                    "candidate node " + std::string(node_path) + " must be disabled");

    VfioDevice dev;
    dev.node_path_ = std::string(node_path);
    dev.guard_ = BasePropertyGuard::from_node(*node);
    return dev;
}

void VfioDevice::register_irq_handler(uint32_t line, std::function<void()> handler) {
    irq_handlers_[line] = std::move(handler);
}

void VfioDevice::raise_irq(uint32_t line) const {
    auto it = irq_handlers_.find(line);
    if (it != irq_handlers_.end() && it->second)
        it->second();
}

} // namespace vfpga

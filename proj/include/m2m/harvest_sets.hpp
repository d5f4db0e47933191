#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace m2m {

/// Per device, the phases whose received power it harvests from: cluster
/// indices under NOMA, gateway indices under TDMA. Kept sorted.
struct HarvestSets {
  std::vector<std::vector<std::size_t>> per_device;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& s : per_device) n += s.size();
    return n;
  }
  bool contains(std::size_t device, std::size_t phase) const {
    const auto& s = per_device.at(device);
    return std::binary_search(s.begin(), s.end(), phase);
  }
  bool operator==(const HarvestSets&) const = default;
};

}  // namespace m2m

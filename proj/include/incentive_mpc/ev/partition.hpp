#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace incentive_mpc::ev {

struct SocGroup {
  std::vector<std::size_t> members;  // indices into the input list
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  double dy0 = 0.0;
  double mean_y0 = 0.0;
  std::size_t slot = 0;  // interval index in [0, P)
};

// P equal-width intervals over [min, max] of the given SoCs; the last interval is closed.
// Empty intervals are dropped.
inline std::vector<SocGroup> partition_population(const std::vector<double>& soc, std::size_t P) {
  if (P < 1) throw std::invalid_argument("partition_population: P must be at least 1");
  std::vector<SocGroup> out;
  if (soc.empty()) return out;
  const auto [mn, mx] = std::minmax_element(soc.begin(), soc.end());
  const double lo = *mn, hi = *mx;
  const double width = (hi - lo) / double(P);
  std::vector<SocGroup> slots(P);
  for (std::size_t p = 0; p < P; ++p) {
    slots[p].slot = p;
    slots[p].lo = lo + width * double(p);
    slots[p].hi = p + 1 == P ? hi : lo + width * double(p + 1);
    slots[p].center = 0.5 * (slots[p].lo + slots[p].hi);
    slots[p].dy0 = 0.5 * (slots[p].hi - slots[p].lo);
  }
  for (std::size_t i = 0; i < soc.size(); ++i) {
    std::size_t p = width > 0.0 ? std::size_t((soc[i] - lo) / width) : 0;
    p = std::min(p, P - 1);
    // floating-point edge cases at interval borders
    while (p > 0 && soc[i] < slots[p].lo) --p;
    while (p + 1 < P && soc[i] >= slots[p + 1].lo) ++p;
    slots[p].members.push_back(i);
  }
  for (auto& g : slots) {
    if (g.members.empty()) continue;
    double s = 0.0;
    for (std::size_t i : g.members) s += soc[i];
    g.mean_y0 = s / double(g.members.size());
    // every member must sit within dy0 of the center
    for (std::size_t i : g.members) g.dy0 = std::max(g.dy0, std::abs(soc[i] - g.center));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace incentive_mpc::ev

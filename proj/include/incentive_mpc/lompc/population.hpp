#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "incentive_mpc/lompc/lompc.hpp"

namespace incentive_mpc {

struct Population {
  std::vector<LoMPCSpec> members;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<double> theta_bar_per_group;

  // Throws std::invalid_argument when the partition or the shared-shape rules fail.
  void validate(double theta_slack = 1e-12) const {
    std::vector<int> seen(members.size(), 0);
    if (theta_bar_per_group.size() != groups.size()) {
      throw std::invalid_argument("Population: one theta bound per group required");
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].empty()) throw std::invalid_argument("Population: empty group");
      const LoMPCSpec& first = members.at(groups[g].front());
      for (std::size_t i : groups[g]) {
        if (i >= members.size() || seen[i]++) {
          throw std::invalid_argument("Population: groups do not partition the members");
        }
        const LoMPCSpec& s = members[i];
        if (s.base_objective != first.base_objective || s.input_box != first.input_box ||
            s.incentive_map != first.incentive_map || s.strong_m != first.strong_m) {
          throw std::invalid_argument("Population: group members differ beyond theta");
        }
        if (s.theta.size() > 0 && s.theta.norm() > theta_bar_per_group[g] * (1.0 + theta_slack) + theta_slack) {
          throw std::invalid_argument("Population: member theta exceeds the group bound");
        }
      }
    }
    for (int c : seen) {
      if (c != 1) throw std::invalid_argument("Population: groups do not partition the members");
    }
  }

  double theta_bar_over_m(std::size_t group) const {
    return theta_bar_per_group.at(group) / members.at(groups.at(group).front()).strong_m;
  }
};

struct GroupResponse {
  Vector average;
  std::vector<Vector> members;
};

// Members are solved independently; the sum runs in member-index order.
inline GroupResponse group_response(const Population& pop, std::size_t group, const Vector& lambda,
                                    const Executor& ex = Executor{},
                                    const std::vector<Vector>* warm = nullptr,
                                    const MemberSolveOptions& opt = {}) {
  const auto& idx = pop.groups.at(group);
  if (idx.empty()) throw std::invalid_argument("average_response: empty group");
  GroupResponse out;
  out.members.resize(idx.size());
  ex.for_each(idx.size(), [&](std::size_t k) {
    const Vector* ws = (warm && k < warm->size() && (*warm)[k].size() > 0) ? &(*warm)[k] : nullptr;
    out.members[k] = solve_member(pop.members[idx[k]], lambda, opt, ws);
  });
  out.average = Vector::Zero(out.members.front().size());
  for (const Vector& w : out.members) out.average += w;
  out.average /= double(idx.size());
  return out;
}

inline Vector average_response(const Population& pop, std::size_t group, const Vector& lambda,
                               const Executor& ex = Executor{}) {
  return group_response(pop, group, lambda, ex).average;
}

// lambda -> group average, keeping per-member warm starts between calls.
using ResponseOracle = std::function<Vector(const Vector& lambda)>;

inline ResponseOracle make_group_oracle(std::shared_ptr<const Population> pop, std::size_t group,
                                        Executor ex = Executor{}, MemberSolveOptions opt = {}) {
  auto warm = std::make_shared<std::vector<Vector>>();
  return [pop, group, ex, opt, warm](const Vector& lambda) {
    GroupResponse r = group_response(*pop, group, lambda, ex, warm.get(), opt);
    *warm = std::move(r.members);
    return r.average;
  };
}

}  // namespace incentive_mpc

#pragma once

#include <array>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "nosd/model.hpp"
#include "nosd/rng.hpp"

namespace nosd {

// Full test plan: all groups share the same number of inspection
// intervals; two competing causes are fixed by the model.
struct TestPlan {
  std::vector<GroupDesign> groups;

  void validate() const {
    if (groups.empty()) throw std::invalid_argument("TestPlan: no groups");
    const int L = groups.front().intervals();
    for (const auto& g : groups) {
      g.validate();
      if (g.intervals() != L)
        throw std::invalid_argument("TestPlan: groups must share the interval count");
    }
  }
  int intervals() const { return groups.front().intervals(); }
  int total_devices() const {
    int G = 0;
    for (const auto& g : groups) G += g.devices;
    return G;
  }
  std::vector<double> weights() const {  // w_i = g_i / G
    const double G = total_devices();
    std::vector<double> w;
    w.reserve(groups.size());
    for (const auto& g : groups) w.push_back(g.devices / G);
    return w;
  }
};

// Observed interval/cause death counts and survivors per group.
struct FailureCounts {
  struct Group {
    std::vector<std::array<int, 2>> n;  // [interval][cause]
    int survivors = 0;
  };
  std::vector<Group> groups;

  int total_failures() const {
    int t = 0;
    for (const auto& g : groups)
      for (const auto& row : g.n) t += row[0] + row[1];
    return t;
  }

  void validate(const TestPlan& plan) const {
    if (groups.size() != plan.groups.size())
      throw std::invalid_argument("FailureCounts: group count mismatch with plan");
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const auto& g = groups[i];
      if (static_cast<int>(g.n.size()) != plan.groups[i].intervals())
        throw std::invalid_argument("FailureCounts: interval count mismatch with plan");
      int sum = g.survivors;
      if (g.survivors < 0)
        throw std::invalid_argument("FailureCounts: negative survivor count");
      for (const auto& row : g.n) {
        if (row[0] < 0 || row[1] < 0)
          throw std::invalid_argument("FailureCounts: negative death count");
        sum += row[0] + row[1];
      }
      if (sum != plan.groups[i].devices)
        throw std::invalid_argument(
            "FailureCounts: survivors plus deaths must equal the group size");
    }
  }

  // flat h-order per group to match CellProbabilities::flat()
  std::vector<double> flat_group(std::size_t i) const {
    std::vector<double> out;
    out.reserve(2 * groups[i].n.size() + 1);
    for (const auto& row : groups[i].n) {
      out.push_back(row[0]);
      out.push_back(row[1]);
    }
    out.push_back(groups[i].survivors);
    return out;
  }
};

// Per-group empirical cell frequencies in flat h-order.
struct EmpiricalProbs {
  std::vector<std::vector<double>> q;
};

// qhat_ilr = n_ilr / g_i, qhat_i0 = k_i / g_i
inline EmpiricalProbs empirical_probs(const FailureCounts& counts, const TestPlan& plan) {
  plan.validate();
  counts.validate(plan);
  EmpiricalProbs out;
  out.q.reserve(plan.groups.size());
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    auto q = counts.flat_group(i);
    for (double& v : q) v /= plan.groups[i].devices;
    out.q.push_back(std::move(q));
  }
  return out;
}

// Add-one smoothing over the 2L+1 cells keeps every frequency strictly
// positive: qtilde = (count + 1) / (g + 2L + 1).
inline EmpiricalProbs smoothed_probs(const FailureCounts& counts, const TestPlan& plan) {
  plan.validate();
  counts.validate(plan);
  EmpiricalProbs out;
  out.q.reserve(plan.groups.size());
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    auto q = counts.flat_group(i);
    const double den = plan.groups[i].devices + 2.0 * plan.groups[i].intervals() + 1.0;
    for (double& v : q) v = (v + 1.0) / den;
    out.q.push_back(std::move(q));
  }
  return out;
}

// One multinomial draw of size g_i over the 2L+1 cells of each group.
// Deterministic given the seed.
inline FailureCounts simulate_counts(const ModelParams& params, const TestPlan& plan,
                                     std::uint64_t seed) {
  plan.validate();
  Rng rng(seed);
  FailureCounts out;
  out.groups.reserve(plan.groups.size());
  for (const auto& g : plan.groups) {
    const auto cells = cell_probabilities(params, g).flat();
    const auto draw = rng.multinomial(g.devices, cells);
    FailureCounts::Group cg;
    cg.n.resize(g.intervals());
    for (int l = 0; l < g.intervals(); ++l) cg.n[l] = {draw[2 * l], draw[2 * l + 1]};
    cg.survivors = draw[2 * g.intervals()];
    out.groups.push_back(std::move(cg));
  }
  return out;
}

inline ModelParams contaminate(const ModelParams& params, const std::array<double, 4>& shifts) {
  return params + shifts;
}

// ---- built-in designs ----------------------------------------------------

// Simulation layouts used throughout the test suite.
inline TestPlan sim1_plan() {
  return {{{20, 1.5, {0.1, 0.7, 1.6}},
           {25, 3.5, {0.3, 1.0, 2.7}},
           {30, 5.5, {0.3, 1.0, 3.0}}}};
}

inline TestPlan sim2_plan() {
  return {{{20, 2.0, {0.1, 0.5, 1.0}},
           {25, 4.0, {0.2, 0.7, 2.0}},
           {30, 6.0, {0.3, 0.6, 1.0}}}};
}

inline ModelParams sim1_truth() { return {-0.20, -0.06, 0.30, -0.17}; }
inline ModelParams sim2_truth() { return {-0.11, 0.11, -0.68, 0.09}; }
inline std::array<double, 4> sim1_contamination_shift() { return {-0.01, -0.01, 0.02, 0.02}; }
inline std::array<double, 4> sim2_contamination_shift() { return {0.009, 0.02, -0.02, -0.009}; }

// SEER pancreatic-cancer cohort (2016 diagnoses, ages 50-55).  Stress is
// the coded tumour size, inspection times are follow-up months, deaths
// split into (cancer, other) causes.
inline std::pair<TestPlan, FailureCounts> seer_pancreatic_2016() {
  TestPlan plan{{{69, 1.0, {2.0, 10.0, 30.0}},
                 {90, 2.0, {1.0, 10.0, 34.0}},
                 {76, 3.0, {1.0, 8.0, 20.0}}}};
  FailureCounts counts;
  counts.groups = {{{{7, 1}, {26, 0}, {28, 2}}, 5},
                   {{{14, 1}, {33, 1}, {31, 3}}, 7},
                   {{{21, 1}, {23, 1}, {22, 1}}, 7}};
  return {plan, counts};
}

inline std::pair<TestPlan, FailureCounts> named_fixture(const std::string& name) {
  if (name == "seer-pancreatic-2016") return seer_pancreatic_2016();
  throw std::invalid_argument("unknown fixture: " + name);
}

}  // namespace nosd

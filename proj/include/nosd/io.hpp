#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "nosd/data.hpp"

namespace nosd {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
T field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ConfigError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + ": field '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline json plan_to_json(const TestPlan& plan) {
  json groups = json::array();
  for (const auto& g : plan.groups)
    groups.push_back({{"g", g.devices}, {"s", g.stress}, {"tau", g.tau}});
  return {{"groups", groups}};
}

inline TestPlan plan_from_json(const json& j) {
  if (!j.contains("groups") || !j.at("groups").is_array())
    throw ConfigError("plan: expected an array field 'groups'");
  TestPlan plan;
  int idx = 0;
  for (const auto& gj : j.at("groups")) {
    const std::string ctx = "plan.groups[" + std::to_string(idx++) + "]";
    GroupDesign g;
    g.devices = detail::field<int>(gj, "g", ctx);
    g.stress = detail::field<double>(gj, "s", ctx);
    g.tau = detail::field<std::vector<double>>(gj, "tau", ctx);
    plan.groups.push_back(std::move(g));
  }
  try {
    plan.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  return plan;
}

inline json counts_to_json(const FailureCounts& counts) {
  json n = json::array(), k = json::array();
  for (const auto& g : counts.groups) {
    json rows = json::array();
    for (const auto& row : g.n) rows.push_back({row[0], row[1]});
    n.push_back(rows);
    k.push_back(g.survivors);
  }
  return {{"n", n}, {"k", k}};
}

inline FailureCounts counts_from_json(const json& j) {
  if (!j.contains("n") || !j.contains("k"))
    throw ConfigError("counts: expected fields 'n' and 'k'");
  FailureCounts counts;
  const auto& n = j.at("n");
  const auto& k = j.at("k");
  if (!n.is_array() || !k.is_array() || n.size() != k.size())
    throw ConfigError("counts: 'n' and 'k' must be arrays of equal length");
  for (std::size_t i = 0; i < n.size(); ++i) {
    FailureCounts::Group g;
    const std::string ctx = "counts.n[" + std::to_string(i) + "]";
    if (!n[i].is_array()) throw ConfigError(ctx + ": expected an array of [n1, n2] pairs");
    for (const auto& row : n[i]) {
      if (!row.is_array() || row.size() != 2)
        throw ConfigError(ctx + ": each interval entry must be a [cause1, cause2] pair");
      g.n.push_back({row[0].get<int>(), row[1].get<int>()});
    }
    g.survivors = k[i].get<int>();
    counts.groups.push_back(std::move(g));
  }
  return counts;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace nosd

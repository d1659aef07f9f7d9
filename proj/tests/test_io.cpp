#include <catch2/catch_amalgamated.hpp>

#include "nosd/io.hpp"

using namespace nosd;

TEST_CASE("plan serialization round-trips") {
  const auto [plan, counts] = seer_pancreatic_2016();
  const auto j = plan_to_json(plan);
  const auto back = plan_from_json(j);
  REQUIRE(back.groups.size() == plan.groups.size());
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    CHECK(back.groups[i].devices == plan.groups[i].devices);
    CHECK(back.groups[i].stress == plan.groups[i].stress);
    CHECK(back.groups[i].tau == plan.groups[i].tau);
  }
}

TEST_CASE("counts serialization round-trips") {
  const auto [plan, counts] = seer_pancreatic_2016();
  const auto back = counts_from_json(counts_to_json(counts));
  back.validate(plan);
  REQUIRE(back.groups.size() == counts.groups.size());
  for (std::size_t i = 0; i < counts.groups.size(); ++i) {
    CHECK(back.groups[i].survivors == counts.groups[i].survivors);
    CHECK(back.groups[i].n == counts.groups[i].n);
  }
}

TEST_CASE("schema errors carry field context") {
  SECTION("missing groups") {
    CHECK_THROWS_WITH(plan_from_json(json::object()),
                      Catch::Matchers::ContainsSubstring("groups"));
  }
  SECTION("missing field inside a group") {
    json j = {{"groups", json::array({{{"g", 10}, {"s", 1.0}}})}};
    CHECK_THROWS_WITH(plan_from_json(j), Catch::Matchers::ContainsSubstring("tau"));
  }
  SECTION("bad inspection times bubble up as config errors") {
    json j = {{"groups", json::array({{{"g", 10}, {"s", 1.0}, {"tau", {2.0, 1.0}}}})}};
    CHECK_THROWS_AS(plan_from_json(j), ConfigError);
  }
  SECTION("counts shape mismatch") {
    json j = {{"n", json::array({json::array({json::array({1, 2, 3})})})},
              {"k", json::array({5})}};
    CHECK_THROWS_WITH(counts_from_json(j), Catch::Matchers::ContainsSubstring("pair"));
  }
}

TEST_CASE("the reference instance documents the schema") {
  const auto [plan, counts] = seer_pancreatic_2016();
  const json doc = {{"plan", plan_to_json(plan)}, {"counts", counts_to_json(counts)}};
  CHECK(doc["plan"]["groups"][0]["g"] == 69);
  CHECK(doc["plan"]["groups"][0]["s"] == 1.0);
  CHECK(doc["plan"]["groups"][0]["tau"][2] == 30.0);
  CHECK(doc["counts"]["n"][0][0][0] == 7);
  CHECK(doc["counts"]["k"][2] == 7);
}

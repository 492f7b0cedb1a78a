#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <unordered_set>

#include <json.hpp>

#include "mergeopf/io.hpp"
#include "mergeopf/model.hpp"
#include "mergeopf/scenario.hpp"
#include "test_util.hpp"

using namespace mergeopf;
using namespace mergeopf::testutil;
using nlohmann::json;

TEST_CASE("minimal two-bus document parses") {
  const Network net = parse_network(kTwoBusDoc);
  CHECK(net.n_buses() == 2);
  CHECK(net.n_branches() == 1);
  CHECK(net.n_interconnections() == 0);
  CHECK(net.n_pv_gens() == 1);
  CHECK(net.idx.v_target_pu[0] == doctest::Approx(1.0));
  CHECK(net.idx.p_load_pu[0] == doctest::Approx(0.3));
}

TEST_CASE("dangling bus reference is reported with the id") {
  std::string doc = kTwoBusDoc;
  const auto at = doc.find("\"bus_id\": \"B2\"");
  REQUIRE(at != std::string::npos);
  doc.replace(at, 14, "\"bus_id\": \"B99\"");
  try {
    parse_network(doc);
    FAIL("expected ReferenceError");
  } catch (const ReferenceError& e) {
    CHECK(e.entity == "B99");
    CHECK(std::string(e.what()).find("B99") != std::string::npos);
  }
}

TEST_CASE("six-bus fixture: interconnection flags match area assignment") {
  const Network net = parse_network(kSixBusDoc);
  CHECK(net.n_interconnections() == 2);
  // recompute the flags independently from the raw document
  const json doc = json::parse(kSixBusDoc);
  std::unordered_map<std::string, std::string> area_of;
  for (const auto& b : doc["buses"]) area_of[b["id"]] = b["area_id"];
  for (const auto& br : net.branches) {
    const bool crosses = area_of.at(br.from_bus) != area_of.at(br.to_bus);
    CHECK(br.is_interconnection == crosses);
  }
}

TEST_CASE("schema and invariant errors") {
  SUBCASE("malformed json names the line") {
    try {
      parse_network("{\n  \"version\": 1,\n  oops\n}");
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("wrong version") {
    CHECK_THROWS_AS(parse_network(R"({"version": 2})"), SchemaError);
  }
  SUBCASE("missing key") {
    CHECK_THROWS_AS(parse_network(R"({"version": 1, "s_base_mva": 100})"), SchemaError);
  }
  SUBCASE("v_min above v_max") {
    std::string doc = kTwoBusDoc;
    const auto at = doc.find("\"v_min\": 360.0");
    doc.replace(at, 14, "\"v_min\": 460.0");
    CHECK_THROWS_AS(parse_network(doc), InvariantError);
  }
  SUBCASE("interconnection flag contradicting areas") {
    std::string doc = kTwoBusDoc;
    const auto at = doc.find("\"is_interconnection\": false");
    doc.replace(at, 27, "\"is_interconnection\": true");
    CHECK_THROWS_AS(parse_network(doc), InvariantError);
  }
  SUBCASE("duplicate id") {
    std::string doc = kSixBusDoc;
    const auto at = doc.find("\"id\": \"D3\"");
    doc.replace(at, 10, "\"id\": \"D2\"");
    CHECK_THROWS_AS(parse_network(doc), InvariantError);
  }
  SUBCASE("PV bus without generator") {
    std::string doc = kTwoBusDoc;
    const auto at = doc.find("\"bus_id\": \"B1\"");
    doc.replace(at, 14, "\"bus_id\": \"B2\"");
    CHECK_THROWS_AS(parse_network(doc), InvariantError);
  }
}

TEST_CASE("validate_network on the two-bus case") {
  const Network net = parse_network(kTwoBusDoc);
  const ValidationReport rep = validate_network(net);
  CHECK(rep.n_components == 1);
  REQUIRE(rep.reference_buses.size() == 1);
  CHECK(rep.reference_buses[0] == "B1");  // lowest-id PV bus
  CHECK(rep.buses_without_injection.empty());
  CHECK(rep.interconnections_missing_target.empty());
}

TEST_CASE("validate_network flags an isolated bus") {
  json doc = json::parse(kTwoBusDoc);
  doc["buses"].push_back({{"id", "B9"},
                          {"area_id", "A1"},
                          {"kind", "PQ"},
                          {"v_min", 360.0},
                          {"v_max", 440.0},
                          {"v_base", 400.0}});
  const Network net = parse_network(doc.dump());
  const ValidationReport rep = validate_network(net);
  CHECK(rep.n_components == 2);
  REQUIRE(rep.buses_without_injection.size() == 1);
  CHECK(rep.buses_without_injection[0] == "B9");
}

namespace {

// independent union-find pass over the raw document
int oracle_component_count(const json& doc) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, int> of;
  for (const auto& b : doc["buses"]) {
    of[b["id"]] = static_cast<int>(ids.size());
    ids.push_back(b["id"]);
  }
  std::vector<int> parent(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  for (const auto& br : doc["branches"]) parent[find(of.at(br["from_bus"]))] = find(of.at(br["to_bus"]));
  std::unordered_set<int> roots;
  for (size_t i = 0; i < ids.size(); ++i) roots.insert(find(static_cast<int>(i)));
  return static_cast<int>(roots.size());
}

}  // namespace

TEST_CASE("component count matches an independent union-find") {
  for (const char* raw : {kTwoBusDoc, kSixBusDoc}) {
    const json doc = json::parse(raw);
    const Network net = parse_network(raw);
    CHECK(validate_network(net).n_components == oracle_component_count(doc));
  }
}

TEST_CASE("missing interconnection target is reported, not rejected") {
  json doc = json::parse(kSixBusDoc);
  doc["interconnections"][0].erase("target_to_side");
  const Network net = parse_network(doc.dump());
  const ValidationReport rep = validate_network(net);
  REQUIRE(rep.interconnections_missing_target.size() == 1);
  CHECK(rep.interconnections_missing_target[0] == "T1");
}

TEST_CASE("serialize then parse is the identity on the document") {
  auto roundtrip = [](const Network& net) {
    const std::string once = serialize_network(net);
    const Network back = parse_network(once);
    const std::string twice = serialize_network(back);
    CHECK(json::parse(once) == json::parse(twice));
  };
  roundtrip(parse_network(kTwoBusDoc));
  roundtrip(parse_network(kSixBusDoc));
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.dacf_areas = {1};
    roundtrip(generate(spec).network);
  }
}

TEST_CASE("reference bus selection is deterministic") {
  const Network a = parse_network(kSixBusDoc);
  const Network b = parse_network(kSixBusDoc);
  CHECK(validate_network(a).reference_buses == validate_network(b).reference_buses);
}

TEST_CASE("state document round trip") {
  ScenarioSpec spec;
  spec.seed = 4;
  spec.dacf_areas = {2};
  Scenario sc = generate(spec);
  const std::string doc = serialize_state(sc.network, sc.ground_truth);
  const NetworkState back = parse_state(sc.network, doc);
  CHECK((back.v - sc.ground_truth.v).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.theta - sc.ground_truth.theta).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.dp - sc.ground_truth.dp).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.q_gen - sc.ground_truth.q_gen).cwiseAbs().maxCoeff() <= 1e-12);
}

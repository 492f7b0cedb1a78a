#include "mergeopf/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace mergeopf {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int line_of_offset(const std::string& text, size_t byte) {
  int line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("line " + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }
}

const json& require(const json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ctx + ": missing key '" + key + "'");
  return *it;
}

double require_number(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_number()) throw SchemaError(ctx + ": key '" + key + "' must be a number");
  return v.get<double>();
}

double optional_number(const json& obj, const char* key, double fallback, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw SchemaError(ctx + ": key '" + key + "' must be a number");
  return it->get<double>();
}

std::string require_string(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_string()) throw SchemaError(ctx + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

const json& require_array(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_array()) throw SchemaError(ctx + ": key '" + key + "' must be an array");
  return v;
}

json number_or_null(double x) {
  if (std::isnan(x)) return nullptr;
  return x;
}

}  // namespace

Network parse_network(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw SchemaError("document root must be an object");
  const int version = static_cast<int>(require_number(doc, "version", "document"));
  if (version != 1) throw SchemaError("unsupported document version " + std::to_string(version));

  Network net;
  net.s_base_mva = require_number(doc, "s_base_mva", "document");

  for (const json& a : require_array(doc, "areas", "document")) {
    Area area;
    area.id = require_string(a, "id", "area");
    area.reliability = reliability_from_string(require_string(a, "reliability", "area " + area.id));
    area.snapshot_age = optional_number(a, "snapshot_age", 0.0, "area " + area.id);
    net.areas.push_back(std::move(area));
  }

  for (const json& b : require_array(doc, "buses", "document")) {
    Bus bus;
    bus.id = require_string(b, "id", "bus");
    const std::string ctx = "bus " + bus.id;
    bus.area_id = require_string(b, "area_id", ctx);
    bus.kind = bus_kind_from_string(require_string(b, "kind", ctx));
    bus.v_min = require_number(b, "v_min", ctx);
    bus.v_max = require_number(b, "v_max", ctx);
    bus.v_base = require_number(b, "v_base", ctx);
    if (bus.kind == BusKind::PV)
      bus.v_target = require_number(b, "v_target", ctx);
    else
      bus.v_target = optional_number(b, "v_target", kNaN, ctx);
    net.buses.push_back(std::move(bus));
  }

  for (const json& g : require_array(doc, "generators", "document")) {
    Generator gen;
    gen.id = require_string(g, "id", "generator");
    const std::string ctx = "generator " + gen.id;
    gen.bus_id = require_string(g, "bus_id", ctx);
    gen.p_fixed = require_number(g, "p_fixed", ctx);
    gen.q_fixed = optional_number(g, "q_fixed", kNaN, ctx);
    gen.q_min = optional_number(g, "q_min", kNaN, ctx);
    gen.q_max = optional_number(g, "q_max", kNaN, ctx);
    net.generators.push_back(std::move(gen));
  }

  for (const json& l : require_array(doc, "loads", "document")) {
    Load load;
    load.id = require_string(l, "id", "load");
    const std::string ctx = "load " + load.id;
    load.bus_id = require_string(l, "bus_id", ctx);
    load.p_target = require_number(l, "p_target", ctx);
    load.q_target = require_number(l, "q_target", ctx);
    net.loads.push_back(std::move(load));
  }

  for (const json& b : require_array(doc, "branches", "document")) {
    Branch br;
    br.id = require_string(b, "id", "branch");
    const std::string ctx = "branch " + br.id;
    br.from_bus = require_string(b, "from_bus", ctx);
    br.to_bus = require_string(b, "to_bus", ctx);
    br.r = require_number(b, "r", ctx);
    br.x = require_number(b, "x", ctx);
    br.b_shunt = optional_number(b, "b_shunt", 0.0, ctx);
    br.tap = optional_number(b, "tap", 1.0, ctx);
    br.shift = optional_number(b, "shift", 0.0, ctx);
    net.branches.push_back(std::move(br));
  }
  // is_interconnection may be omitted; it is derivable from area assignment.
  {
    std::unordered_map<std::string, std::string> bus_area;
    for (const Bus& bus : net.buses) bus_area[bus.id] = bus.area_id;
    size_t i = 0;
    for (const json& b : require_array(doc, "branches", "document")) {
      Branch& br = net.branches[i++];
      auto it = b.find("is_interconnection");
      if (it != b.end() && !it->is_null()) {
        if (!it->is_boolean())
          throw SchemaError("branch " + br.id + ": key 'is_interconnection' must be a boolean");
        br.is_interconnection = it->get<bool>();
      } else {
        auto f = bus_area.find(br.from_bus);
        auto t = bus_area.find(br.to_bus);
        br.is_interconnection = f != bus_area.end() && t != bus_area.end() && f->second != t->second;
      }
    }
  }

  for (const json& i : require_array(doc, "interconnections", "document")) {
    Interconnection ic;
    ic.branch_id = require_string(i, "branch_id", "interconnection");
    const std::string ctx = "interconnection " + ic.branch_id;
    ic.target_from_side = optional_number(i, "target_from_side", kNaN, ctx);
    ic.target_to_side = optional_number(i, "target_to_side", kNaN, ctx);
    ic.from_reliability = reliability_from_string(require_string(i, "from_reliability", ctx));
    ic.to_reliability = reliability_from_string(require_string(i, "to_reliability", ctx));
    net.interconnections.push_back(std::move(ic));
  }

  net.finalize();
  return net;
}

std::string serialize_network(const Network& net) {
  json doc;
  doc["version"] = 1;
  doc["s_base_mva"] = net.s_base_mva;
  doc["areas"] = json::array();
  for (const Area& a : net.areas)
    doc["areas"].push_back({{"id", a.id},
                            {"reliability", to_string(a.reliability)},
                            {"snapshot_age", a.snapshot_age}});
  doc["buses"] = json::array();
  for (const Bus& b : net.buses) {
    json j = {{"id", b.id},     {"area_id", b.area_id}, {"kind", to_string(b.kind)},
              {"v_min", b.v_min}, {"v_max", b.v_max},   {"v_base", b.v_base}};
    if (b.kind == BusKind::PV) j["v_target"] = b.v_target;
    doc["buses"].push_back(std::move(j));
  }
  doc["generators"] = json::array();
  for (size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    json j = {{"id", gen.id}, {"bus_id", gen.bus_id}, {"p_fixed", gen.p_fixed}};
    if (net.idx.gen_qvar[g] >= 0) {
      j["q_min"] = gen.q_min;
      j["q_max"] = gen.q_max;
    } else {
      j["q_fixed"] = number_or_null(gen.q_fixed);
    }
    doc["generators"].push_back(std::move(j));
  }
  doc["loads"] = json::array();
  for (const Load& l : net.loads)
    doc["loads"].push_back(
        {{"id", l.id}, {"bus_id", l.bus_id}, {"p_target", l.p_target}, {"q_target", l.q_target}});
  doc["branches"] = json::array();
  for (const Branch& b : net.branches)
    doc["branches"].push_back({{"id", b.id},
                               {"from_bus", b.from_bus},
                               {"to_bus", b.to_bus},
                               {"r", b.r},
                               {"x", b.x},
                               {"b_shunt", b.b_shunt},
                               {"tap", b.tap},
                               {"shift", b.shift},
                               {"is_interconnection", b.is_interconnection}});
  doc["interconnections"] = json::array();
  for (const Interconnection& ic : net.interconnections)
    doc["interconnections"].push_back({{"branch_id", ic.branch_id},
                                       {"target_from_side", number_or_null(ic.target_from_side)},
                                       {"target_to_side", number_or_null(ic.target_to_side)},
                                       {"from_reliability", to_string(ic.from_reliability)},
                                       {"to_reliability", to_string(ic.to_reliability)}});
  return doc.dump(2) + "\n";
}

NetworkState parse_state(const Network& net, const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw SchemaError("state document root must be an object");
  const int version = static_cast<int>(require_number(doc, "version", "state document"));
  if (version != 1) throw SchemaError("unsupported state document version " + std::to_string(version));

  NetworkState st = flat_start(net);
  for (const json& b : require_array(doc, "buses", "state document")) {
    const std::string id = require_string(b, "id", "state bus");
    auto it = net.idx.bus.find(id);
    if (it == net.idx.bus.end())
      throw ReferenceError(id, "state references missing bus '" + id + "'");
    const Bus& bus = net.buses[it->second];
    st.v[it->second] = require_number(b, "v_kv", "state bus " + id) / bus.v_base;
    st.theta[it->second] = require_number(b, "theta_rad", "state bus " + id);
  }
  for (const json& l : require_array(doc, "loads", "state document")) {
    const std::string id = require_string(l, "id", "state load");
    auto it = net.idx.load.find(id);
    if (it == net.idx.load.end())
      throw ReferenceError(id, "state references missing load '" + id + "'");
    st.dp[it->second] = require_number(l, "dp_mw", "state load " + id) / net.s_base_mva;
    st.dq[it->second] = require_number(l, "dq_mvar", "state load " + id) / net.s_base_mva;
  }
  for (const json& g : require_array(doc, "generators", "state document")) {
    const std::string id = require_string(g, "id", "state generator");
    auto it = net.idx.gen.find(id);
    if (it == net.idx.gen.end())
      throw ReferenceError(id, "state references missing generator '" + id + "'");
    const int qvar = net.idx.gen_qvar[it->second];
    if (qvar >= 0)
      st.q_gen[qvar] = require_number(g, "q_mvar", "state generator " + id) / net.s_base_mva;
  }
  return st;
}

std::string serialize_state(const Network& net, const NetworkState& state) {
  json doc;
  doc["version"] = 1;
  doc["buses"] = json::array();
  for (int b = 0; b < net.n_buses(); ++b)
    doc["buses"].push_back({{"id", net.buses[b].id},
                            {"v_kv", state.v[b] * net.buses[b].v_base},
                            {"theta_rad", state.theta[b]}});
  doc["loads"] = json::array();
  for (int l = 0; l < net.n_loads(); ++l)
    doc["loads"].push_back({{"id", net.loads[l].id},
                            {"dp_mw", state.dp[l] * net.s_base_mva},
                            {"dq_mvar", state.dq[l] * net.s_base_mva}});
  doc["generators"] = json::array();
  for (int slot = 0; slot < net.n_pv_gens(); ++slot) {
    const int g = net.idx.pv_gens[slot];
    doc["generators"].push_back(
        {{"id", net.generators[g].id}, {"q_mvar", state.q_gen[slot] * net.s_base_mva}});
  }
  return doc.dump(2) + "\n";
}

Network read_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

NetworkState read_state_file(const Network& net, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_state(net, ss.str());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

}  // namespace mergeopf

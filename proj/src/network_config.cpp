#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vvcguard/errors.hpp"
#include "vvcguard/grid.hpp"

namespace vvcguard::grid {

namespace {

using nlohmann::json;

json transformer_json(const TransformerSpec& t) {
  return json{{"bus", t.bus},         {"rating_mva", t.rating_mva}, {"hv_kv", t.hv_kv},
              {"lv_kv", t.lv_kv},     {"r_pu", t.r_pu},             {"x_pu", t.x_pu}};
}

TransformerSpec transformer_from(const json& j) {
  TransformerSpec t;
  t.bus = j.at("bus").get<BusId>();
  t.rating_mva = j.at("rating_mva").get<double>();
  t.hv_kv = j.at("hv_kv").get<double>();
  t.lv_kv = j.at("lv_kv").get<double>();
  t.r_pu = j.value("r_pu", 0.0);
  t.x_pu = j.value("x_pu", 0.0);
  return t;
}

}  // namespace

std::string network_config_to_string(const NetworkSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["base"] = {{"s_base_mva", spec.base.s_base_mva},
               {"v_base_mv_kv", spec.base.v_base_mv_kv},
               {"v_base_lv_kv", spec.base.v_base_lv_kv}};
  j["buses"] = spec.buses;
  j["substation_bus"] = spec.substation_bus;
  j["source"] = {{"short_circuit_mva", spec.source.short_circuit_mva},
                 {"x_over_r", spec.source.x_over_r},
                 {"nominal_voltage_pu", spec.source.nominal_voltage_pu}};
  j["substation_transformer"] = transformer_json(spec.substation_transformer);
  j["lines"] = json::array();
  for (const auto& line : spec.lines) {
    j["lines"].push_back({{"from", line.from_bus},
                          {"to", line.to_bus},
                          {"r_ohm_per_km", line.r_ohm_per_km},
                          {"x_ohm_per_km", line.x_ohm_per_km},
                          {"length_km", line.length_km}});
  }
  j["dgs"] = json::array();
  for (std::size_t d = 0; d < spec.dg_buses.size(); ++d) {
    j["dgs"].push_back({{"bus", spec.dg_buses[d]},
                        {"rating_mva", spec.dg_rating_mva.at(d)},
                        {"interface_transformer", transformer_json(spec.interface_transformers.at(d))}});
  }
  j["loads"] = json::array();
  for (const auto& load : spec.loads) {
    j["loads"].push_back(
        {{"bus", load.bus}, {"p_mw", load.p_mw}, {"q_mvar", load.q_mvar}, {"scale", load.scale}});
  }
  return j.dump(2) + "\n";
}

NetworkSpec network_config_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("network config is not valid JSON: ") + e.what());
  }
  try {
    NetworkSpec spec;
    spec.name = j.value("name", std::string{});
    if (j.contains("base")) {
      const auto& b = j["base"];
      spec.base.s_base_mva = b.value("s_base_mva", spec.base.s_base_mva);
      spec.base.v_base_mv_kv = b.value("v_base_mv_kv", spec.base.v_base_mv_kv);
      spec.base.v_base_lv_kv = b.value("v_base_lv_kv", spec.base.v_base_lv_kv);
    }
    spec.buses = j.at("buses").get<std::vector<BusId>>();
    spec.substation_bus = j.at("substation_bus").get<BusId>();
    const auto& s = j.at("source");
    spec.source.short_circuit_mva = s.at("short_circuit_mva").get<double>();
    spec.source.x_over_r = s.at("x_over_r").get<double>();
    spec.source.nominal_voltage_pu = s.value("nominal_voltage_pu", 1.0);
    spec.substation_transformer = transformer_from(j.at("substation_transformer"));
    for (const auto& line : j.at("lines")) {
      spec.lines.push_back(LineSpec{line.at("from").get<BusId>(), line.at("to").get<BusId>(),
                                    line.at("r_ohm_per_km").get<double>(),
                                    line.at("x_ohm_per_km").get<double>(),
                                    line.value("length_km", 1.0)});
    }
    for (const auto& dg : j.at("dgs")) {
      spec.dg_buses.push_back(dg.at("bus").get<BusId>());
      spec.dg_rating_mva.push_back(dg.at("rating_mva").get<double>());
      auto t = transformer_from(dg.at("interface_transformer"));
      t.bus = spec.dg_buses.back();
      spec.interface_transformers.push_back(t);
    }
    for (const auto& load : j.at("loads")) {
      spec.loads.push_back(LoadSpec{load.at("bus").get<BusId>(), load.at("p_mw").get<double>(),
                                    load.value("q_mvar", 0.0), load.value("scale", 1.0)});
    }
    return spec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("network config is missing a field: ") + e.what());
  }
}

NetworkSpec load_network_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open network config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return network_config_from_string(buffer.str());
}

void save_network_config(const std::string& path, const NetworkSpec& spec) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write network config " + path);
  out << network_config_to_string(spec);
}

std::string bundled_network_config() { return std::string(VVCGUARD_DATA_DIR) + "/benchmark_9bus.json"; }

}  // namespace vvcguard::grid

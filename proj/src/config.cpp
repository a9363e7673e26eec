#include "nlf/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "nlf/errors.hpp"

namespace nlf {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& known) {
  for (const auto& [k, v] : obj.items())
    if (!known.count(k))
      throw ConfigError(where.empty() ? k : where + "." + k, "unknown key");
}

const json* section(const json& j, const std::string& name) {
  if (!j.contains(name)) return nullptr;
  const json& s = j.at(name);
  if (!s.is_object()) throw ConfigError(name, "expected an object");
  return &s;
}

void read_number(const json* sec, const std::string& where, const std::string& key, double& out) {
  if (!sec || !sec->contains(key)) return;
  const json& v = sec->at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key, "expected a number");
  out = v.get<double>();
}

}  // namespace

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number for the diagnostic.
    const std::string text = buf.str();
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ConfigError(path + ":" + std::to_string(line), e.what());
  }
}

SystemParams system_params_from_json(const json& j, const std::string& default_preset) {
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  reject_unknown(j, "", {"preset", "mode1", "mode2", "rwa", "scaling", "experiment"});
  std::string name = default_preset;
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw ConfigError("preset", "expected a string");
    name = j.at("preset").get<std::string>();
  }
  SystemParams s = preset(name);

  for (const char* m : {"mode1", "mode2"}) {
    const json* sec = section(j, m);
    if (!sec) continue;
    reject_unknown(*sec, m, {"omega_rad_s", "gamma_rad_s", "mass_kg"});
    ModeParams& mp = std::string(m) == "mode1" ? s.modes.mode1 : s.modes.mode2;
    read_number(sec, m, "omega_rad_s", mp.omega);
    read_number(sec, m, "gamma_rad_s", mp.gamma);
    read_number(sec, m, "mass_kg", mp.mass);
  }
  if (const json* sec = section(j, "rwa")) {
    reject_unknown(*sec, "rwa", {"lambda11_per_s", "lambda22_per_s", "lambda12_per_s", "fp_per_s",
                                 "delta_hz", "sideband"});
    read_number(sec, "rwa", "lambda11_per_s", s.rwa.lambda11);
    read_number(sec, "rwa", "lambda22_per_s", s.rwa.lambda22);
    read_number(sec, "rwa", "lambda12_per_s", s.rwa.lambda12);
    read_number(sec, "rwa", "fp_per_s", s.rwa.f_p);
    double delta_hz = rad_to_hz(s.rwa.delta);
    read_number(sec, "rwa", "delta_hz", delta_hz);
    s.rwa.delta = hz_to_rad(delta_hz);
    if (sec->contains("sideband")) {
      const json& v = sec->at("sideband");
      if (!v.is_string()) throw ConfigError("rwa.sideband", "expected a string");
      s.rwa.sideband = sideband_from_string(v.get<std::string>());
    }
  }
  if (const json* sec = section(j, "scaling")) {
    reject_unknown(*sec, "scaling", {"c_sc_joule_s"});
    read_number(sec, "scaling", "c_sc_joule_s", s.scaling.c_sc);
  }
  try {
    validate(s);
  } catch (const DomainError& e) {
    throw ConfigError("parameters", e.what());
  }
  return s;
}

json system_params_to_json(const SystemParams& s) {
  json j;
  auto mode = [](const ModeParams& m) {
    return json{{"omega_rad_s", m.omega}, {"gamma_rad_s", m.gamma}, {"mass_kg", m.mass}};
  };
  j["mode1"] = mode(s.modes.mode1);
  j["mode2"] = mode(s.modes.mode2);
  j["rwa"] = {{"lambda11_per_s", s.rwa.lambda11},
              {"lambda22_per_s", s.rwa.lambda22},
              {"lambda12_per_s", s.rwa.lambda12},
              {"fp_per_s", s.rwa.f_p},
              {"delta_hz", rad_to_hz(s.rwa.delta)},
              {"sideband", to_string(s.rwa.sideband)}};
  j["scaling"] = {{"c_sc_joule_s", s.scaling.c_sc}};
  return j;
}

}  // namespace nlf

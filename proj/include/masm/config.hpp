#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "masm/baseline.hpp"
#include "masm/mae.hpp"
#include "masm/phantom.hpp"

namespace masm {

// FNV-1a over the canonical (key-sorted) JSON dump; recorded in output
// headers so runs can be reproduced from their provenance alone.
inline std::string config_hash(const nlohmann::json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw format_error("invalid JSON in " + path + ": " + e.what());
  }
}

// Runtime configuration shared by the estimation subcommands. Schedule
// fields default to the reference values (which depend on T, resolved once
// the data length is known).
struct run_config {
  double c_h = 1.125;
  std::optional<double> b_r;  // default 1/T
  std::optional<double> r_0;  // default 5/T
  int S = 15;
  int S_0 = 2;
  double alpha = 0.05;
  bool tapered = true;
  std::optional<double> baseline_r;  // default r_0 + S * b_r
  double fwhm = 5.0 / 1.5625;        // 5 units at 1.5625 units/pixel
  double am_window_points = 11;      // evaluation window for AM (time points)
  std::array<double, 3> spacing = {1.0, 1.0, 1.0};

  scale_schedule schedule(int T) const {
    return build_schedule(c_h, b_r.value_or(1.0 / T), r_0.value_or(5.0 / T), S, S_0, alpha);
  }

  double voxelwise_radius(int T) const {
    if (baseline_r) return *baseline_r;
    return r_0.value_or(5.0 / T) + S * b_r.value_or(1.0 / T);
  }

  static run_config from_json(const nlohmann::json& j) {
    run_config c;
    if (j.contains("c_h")) c.c_h = j["c_h"].get<double>();
    if (j.contains("b_r") && !j["b_r"].is_null()) c.b_r = j["b_r"].get<double>();
    if (j.contains("r_0") && !j["r_0"].is_null()) c.r_0 = j["r_0"].get<double>();
    if (j.contains("S")) c.S = j["S"].get<int>();
    if (j.contains("S_0")) c.S_0 = j["S_0"].get<int>();
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("tapered")) c.tapered = j["tapered"].get<bool>();
    if (j.contains("baseline_r") && !j["baseline_r"].is_null()) c.baseline_r = j["baseline_r"].get<double>();
    if (j.contains("fwhm")) c.fwhm = j["fwhm"].get<double>();
    if (j.contains("am_window_points")) c.am_window_points = j["am_window_points"].get<double>();
    if (j.contains("spacing")) {
      const auto sp = j["spacing"];
      c.spacing = {sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>()};
    }
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["c_h"] = c_h;
    if (b_r) j["b_r"] = *b_r;
    if (r_0) j["r_0"] = *r_0;
    j["S"] = S;
    j["S_0"] = S_0;
    j["alpha"] = alpha;
    j["tapered"] = tapered;
    if (baseline_r) j["baseline_r"] = *baseline_r;
    j["fwhm"] = fwhm;
    j["am_window_points"] = am_window_points;
    j["spacing"] = {spacing[0], spacing[1], spacing[2]};
    return j;
  }
};

inline nlohmann::json simulation_config_json(const simulation_config& c) {
  nlohmann::json j;
  j["scenario"] = scenario_name(c.scenario);
  j["T"] = c.T;
  j["dims"] = {c.dims.nx, c.dims.ny, c.dims.nz};
  j["p"] = c.bernoulli_p;
  j["seed"] = c.seed;
  if (c.noise.type == noise_spec::kind::ar1) {
    j["noise"] = {{"type", "ar1"}, {"rho", c.noise.rho}, {"sigma2", c.noise.sigma2}};
  } else {
    j["noise"] = {{"type", "white"}, {"sigma2", c.noise.sigma2}};
  }
  return j;
}

inline simulation_config simulation_config_from_json(const nlohmann::json& j) {
  simulation_config c;
  c.scenario = parse_scenario(j.at("scenario").get<std::string>());
  c = c.scenario == scenario_id::sim1 ? sim1_config(0) : sim2_config(0);
  if (j.contains("T")) c.T = j["T"].get<int>();
  if (j.contains("p")) c.bernoulli_p = j["p"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    const std::string type = n.at("type").get<std::string>();
    if (type == "ar1") {
      c.noise = noise_spec::ar1(n.at("rho").get<double>(), n.at("sigma2").get<double>());
    } else if (type == "white") {
      if (n.contains("sigma")) {
        c.noise = noise_spec::white(n["sigma"].get<double>());
      } else {
        c.noise.type = noise_spec::kind::white;
        c.noise.sigma2 = n.at("sigma2").get<double>();
      }
    } else {
      throw config_error("unknown noise type '" + type + "'");
    }
  }
  return c;
}

}  // namespace masm

#ifndef WALKLINE_RUN_CONFIG_HPP
#define WALKLINE_RUN_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "walkline/acceptance.hpp"
#include "walkline/io.hpp"

namespace walkline {

/// A preset name plus named parameters. Values are kept as text so grid ranges
/// ("lo:hi:count") and scalars share one representation and serialise exactly.
struct PresetSpec {
  std::string name;
  std::map<std::string, std::string> params;

  bool operator==(const PresetSpec&) const = default;
};

struct ToleranceField {
  const char* name;
  double Tolerances::*member;
};

inline const std::vector<ToleranceField>& tolerance_fields() {
  static const std::vector<ToleranceField> fields{
      {"path-law", &Tolerances::path_law},
      {"metropolis-tv", &Tolerances::metropolis_tv},
      {"general-tv", &Tolerances::general_tv},
      {"roundtrip", &Tolerances::roundtrip},
      {"ansatz", &Tolerances::ansatz},
      {"rho", &Tolerances::rho},
      {"tail-coefficient", &Tolerances::tail_coefficient},
      {"tail-delta", &Tolerances::tail_delta},
      {"row-sum", &Tolerances::row_sum},
      {"detailed-balance", &Tolerances::detailed_balance},
      {"identity", &Tolerances::identity},
      {"sampler-tv", &Tolerances::sampler_tv},
      {"boundary-margin", &Tolerances::boundary_margin},
  };
  return fields;
}

struct RunConfig {
  std::string command;
  std::string direction;  ///< translate only: rw2sos | sos2rw
  PresetSpec preset;
  std::string input;      ///< model file used instead of a preset
  std::optional<std::size_t> cutoff;
  std::optional<std::size_t> length;
  std::vector<std::size_t> lengths;
  std::optional<std::size_t> time_index;
  std::optional<std::uint64_t> seed;    ///< each command has its own default
  std::optional<std::size_t> samples;
  std::string lambda = "auto";
  std::string out;
  std::size_t jobs = 1;
  std::size_t xmax = 40;
  std::vector<double> deltas{1.2, 0.5, -0.2, -1.2};
  std::vector<std::string> only;
  std::string inject_fault;
  Tolerances tol;

  bool operator==(const RunConfig&) const = default;
};

/// Shortest decimal text that reads back to the same double.
inline std::string shortest_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline json to_json(const RunConfig& c) {
  json tol = json::object();
  for (const auto& f : tolerance_fields()) tol[f.name] = c.tol.*f.member;
  json j{{"command", c.command},
         {"direction", c.direction},
         {"preset", {{"name", c.preset.name}, {"params", c.preset.params}}},
         {"input", c.input},
         {"M", c.cutoff ? json(*c.cutoff) : json(nullptr)},
         {"N", c.length ? json(*c.length) : json(nullptr)},
         {"N_list", c.lengths},
         {"n", c.time_index ? json(*c.time_index) : json(nullptr)},
         {"seed", c.seed ? json(*c.seed) : json(nullptr)},
         {"samples", c.samples ? json(*c.samples) : json(nullptr)},
         {"lambda", c.lambda},
         {"out", c.out},
         {"jobs", c.jobs},
         {"xmax", c.xmax},
         {"deltas", c.deltas},
         {"only", c.only},
         {"inject_fault", c.inject_fault},
         {"tolerances", tol}};
  return j;
}

namespace detail {

template <class T>
void read_if(const json& j, const char* key, T& dst) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    dst = j[key].get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string("config key '") + key + "': " + e.what());
  }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& dst) {
  if (!j.contains(key)) return;
  if (j[key].is_null()) {
    dst.reset();
    return;
  }
  T v{};
  read_if(j, key, v);
  dst = v;
}

}  // namespace detail

inline RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw IoError("config must be a JSON object");
  static const std::vector<std::string> known{"command", "direction", "preset", "input", "M",    "N",
                                              "N_list",  "n",         "seed",   "samples", "lambda", "out",
                                              "jobs",    "xmax",      "deltas", "only",  "inject_fault", "tolerances"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw IoError("unknown config key '" + key + "'");

  RunConfig c;
  detail::read_if(j, "command", c.command);
  detail::read_if(j, "direction", c.direction);
  if (j.contains("preset") && !j["preset"].is_null()) {
    const json& p = j["preset"];
    detail::read_if(p, "name", c.preset.name);
    if (p.contains("params"))
      for (const auto& [k, v] : p["params"].items()) {
        if (v.is_number()) c.preset.params[k] = shortest_real(v.get<double>());
        else if (v.is_string()) c.preset.params[k] = v.get<std::string>();
        else throw IoError("preset parameter '" + k + "' must be a number or a string");
      }
  }
  detail::read_if(j, "input", c.input);
  detail::read_optional(j, "M", c.cutoff);
  detail::read_optional(j, "N", c.length);
  detail::read_if(j, "N_list", c.lengths);
  detail::read_optional(j, "n", c.time_index);
  detail::read_optional(j, "seed", c.seed);
  detail::read_optional(j, "samples", c.samples);
  detail::read_if(j, "lambda", c.lambda);
  detail::read_if(j, "out", c.out);
  detail::read_if(j, "jobs", c.jobs);
  detail::read_if(j, "xmax", c.xmax);
  detail::read_if(j, "deltas", c.deltas);
  detail::read_if(j, "only", c.only);
  detail::read_if(j, "inject_fault", c.inject_fault);
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    for (const auto& [key, value] : t.items()) {
      const auto it = std::find_if(tolerance_fields().begin(), tolerance_fields().end(),
                                   [&](const ToleranceField& f) { return key == f.name; });
      if (it == tolerance_fields().end()) throw IoError("unknown tolerance '" + key + "'");
      if (!value.is_number()) throw IoError("tolerance '" + key + "' must be a number");
      c.tol.*(it->member) = value.get<double>();
    }
  }
  return c;
}

}  // namespace walkline

#endif  // WALKLINE_RUN_CONFIG_HPP

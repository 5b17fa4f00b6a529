#pragma once

/// @file
/// JSON configuration for Monte Carlo cells.
///
/// A file holds either one cell or {"cells": [...]}; top-level keys other
/// than "cells" act as defaults for every cell. Inside "dgp", a numeric or
/// string array expands into a cartesian grid of cells, keys in sorted
/// order with the first key outermost.
///
///   {"dgp": {"p": 20, "q": 20, "r": 3, "c": 3, "n": [200, 800], "a": 0.5,
///            "delta": 0, "omega": 0, "noise_case": "identity", "seed": 1},
///    "params": {"h0": 2, "K": 3}, "replications": 200,
///    "methods": ["SR:two-step", "ER:one-step"]}

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvfactor/dgp.hpp"
#include "mvfactor/error.hpp"
#include "mvfactor/evaluation.hpp"
#include "mvfactor/factor_estimation.hpp"

namespace mvfactor::config {

using nlohmann::json;

namespace detail {

inline void require_known_keys(const json& obj, std::initializer_list<const char*> keys,
                               const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
T get_as(const json& j, const std::string& name) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_unsigned()) throw ConfigError(name + ": expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ConfigError(name + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(name + ": expected a string");
    }
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

inline void apply_dgp_field(DgpConfig& d, const std::string& k, const json& v) {
  const std::string name = "dgp." + k;
  if (k == "p") d.p = get_as<std::size_t>(v, name);
  else if (k == "q") d.q = get_as<std::size_t>(v, name);
  else if (k == "r") d.r = get_as<std::size_t>(v, name);
  else if (k == "c") d.c = get_as<std::size_t>(v, name);
  else if (k == "n") d.n = get_as<std::size_t>(v, name);
  else if (k == "a") d.a = get_as<double>(v, name);
  else if (k == "delta") d.delta = get_as<double>(v, name);
  else if (k == "omega") d.omega = get_as<double>(v, name);
  else if (k == "noise_scale") d.noise_scale = get_as<double>(v, name);
  else if (k == "seed") d.seed = get_as<std::uint64_t>(v, name);
  else if (k == "noise_case") {
    d.noise_case = v.is_number_unsigned() ? parse_noise_case(std::to_string(v.get<std::size_t>()))
                                          : parse_noise_case(get_as<std::string>(v, name));
  } else if (k == "loadings") d.loadings = parse_loading_scheme(get_as<std::string>(v, name));
  else throw ConfigError("dgp: unknown key '" + k + "'");
}

inline void apply_params(LagParams& p, const json& obj) {
  if (!obj.is_object()) throw ConfigError("params: expected an object");
  require_known_keys(obj, {"h0", "K", "i_max"}, "params");
  if (obj.contains("h0")) p.h0 = get_as<std::size_t>(obj["h0"], "params.h0");
  if (obj.contains("K")) p.K = get_as<std::size_t>(obj["K"], "params.K");
  if (obj.contains("i_max")) p.i_max = get_as<std::size_t>(obj["i_max"], "params.i_max");
}

inline MethodSpec parse_method_spec(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("methods: '" + s + "' is not METHOD:mode");
  return {parse_method(s.substr(0, colon)), parse_mode(s.substr(colon + 1))};
}

// Merges `overlay` into `base`, one level deep for "dgp" and "params".
inline json merge(json base, const json& overlay) {
  for (const auto& [k, v] : overlay.items()) {
    if ((k == "dgp" || k == "params") && base.contains(k) && base[k].is_object() && v.is_object()) {
      for (const auto& [kk, vv] : v.items()) base[k][kk] = vv;
    } else {
      base[k] = v;
    }
  }
  return base;
}

// Applies a fully merged cell object. dgp arrays must already be expanded.
inline McCellConfig build_cell(const json& obj) {
  if (!obj.is_object()) throw ConfigError("cell: expected an object");
  require_known_keys(obj, {"dgp", "params", "m", "replications", "methods"}, "cell");
  McCellConfig cell;
  if (obj.contains("dgp")) {
    if (!obj["dgp"].is_object()) throw ConfigError("dgp: expected an object");
    for (const auto& [k, v] : obj["dgp"].items()) apply_dgp_field(cell.dgp, k, v);
  }
  if (obj.contains("params")) apply_params(cell.params, obj["params"]);
  if (obj.contains("m") && !obj["m"].is_null()) cell.m = get_as<std::size_t>(obj["m"], "m");
  if (obj.contains("replications"))
    cell.replications = get_as<std::size_t>(obj["replications"], "replications");
  if (obj.contains("methods")) {
    if (!obj["methods"].is_array()) throw ConfigError("methods: expected an array of strings");
    cell.methods.clear();
    for (const auto& s : obj["methods"]) cell.methods.push_back(parse_method_spec(get_as<std::string>(s, "methods")));
  }
  cell.validate();
  return cell;
}

inline void expand_grid(const json& cell, std::vector<json>& out) {
  if (cell.contains("dgp") && cell["dgp"].is_object()) {
    for (const auto& [k, v] : cell["dgp"].items()) {
      if (!v.is_array()) continue;
      if (v.empty()) throw ConfigError("dgp." + k + ": empty array");
      for (const auto& item : v) {
        json copy = cell;
        copy["dgp"][k] = item;
        expand_grid(copy, out);
      }
      return;
    }
  }
  out.push_back(cell);
}

}  // namespace detail

/// Parses a config document into a list of fully validated cells.
inline std::vector<McCellConfig> parse_cells(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  std::vector<json> raw;
  if (doc.contains("cells")) {
    if (!doc["cells"].is_array() || doc["cells"].empty())
      throw ConfigError("cells: expected a non-empty array");
    json defaults = doc;
    defaults.erase("cells");
    for (const auto& c : doc["cells"]) raw.push_back(detail::merge(defaults, c));
  } else {
    raw.push_back(doc);
  }
  std::vector<json> expanded;
  for (const auto& c : raw) detail::expand_grid(c, expanded);
  std::vector<McCellConfig> cells;
  cells.reserve(expanded.size());
  for (const auto& c : expanded) cells.push_back(detail::build_cell(c));
  return cells;
}

inline std::vector<McCellConfig> parse_cells(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  return parse_cells(doc);
}

inline std::vector<McCellConfig> load_cells(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_cells(text, path);
}

}  // namespace mvfactor::config

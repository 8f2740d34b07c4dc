// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#include "helmdec/config.hpp"

#include "helmdec/mesh.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace helmdec::cli {

namespace {

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  double x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(x))
    throw ConfigError(where + ": '" + s + "' is not a number");
  return x;
}

long long to_int(const std::string& s, const std::string& where) {
  long long x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(where + ": '" + s + "' is not an integer");
  return x;
}

bool to_bool(const std::string& s, const std::string& where) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(where + ": '" + s + "' is not a boolean");
}

int level_value(const std::string& s, const std::string& where) {
  auto l = to_int(s, where);
  if (l < 0 || l > 6) throw ConfigError(where + ": level must lie in [0, 6]");
  return static_cast<int>(l);
}

std::vector<int> level_list(const std::string& s, const std::string& where) {
  std::vector<int> out;
  for (const auto& w : words(s)) out.push_back(level_value(w, where));
  if (out.empty()) throw ConfigError(where + ": empty level list");
  return out;
}

std::vector<double> double_list(const std::string& s, const std::string& where) {
  std::vector<double> out;
  for (const auto& w : words(s)) out.push_back(to_double(w, where));
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::map<std::string, std::map<std::string, Setter>> s = {
      {"run",
       {{"geometry", [](C& c, S v, S) { c.geometry = v; }},
        {"gamma",
         [](C& c, S v, S) {
           c.gamma = words(v);
           if (c.gamma.size() == 1 && c.gamma[0] == "none") c.gamma.clear();
         }},
        {"route", [](C& c, S v, S) { c.route = v; }},
        {"seed",
         [](C& c, S v, S w) {
           auto x = to_int(v, w);
           if (x < 0) throw ConfigError(w + ": seed must be nonnegative");
           c.seed = static_cast<std::uint64_t>(x);
         }}}},
      {"mesh", {{"level", [](C& c, S v, S w) { c.mesh_level = level_value(v, w); }}}},
      {"decompose",
       {{"level", [](C& c, S v, S w) { c.decompose_level = level_value(v, w); }},
        {"field",
         [](C& c, S v, S w) {
           if (v != "random" && v != "gradient" && v != "zero" && v != "incompatible")
             throw ConfigError(w + ": field must be random, gradient, zero or incompatible");
           c.field = v;
         }},
        {"amplitude", [](C& c, S v, S w) { c.amplitude = to_double(v, w); }}}},
      {"sweep",
       {{"levels", [](C& c, S v, S w) { c.sweep_levels = level_list(v, w); }},
        {"samples",
         [](C& c, S v, S w) {
           auto x = to_int(v, w);
           if (x < 1) throw ConfigError(w + ": samples must be positive");
           c.samples = static_cast<int>(x);
         }},
        {"ratio", [](C& c, S v, S) { c.ratio = v; }},
        {"trace_probe", [](C& c, S v, S w) { c.trace_probe = to_bool(v, w); }}}},
      {"battery",
       {{"level", [](C& c, S v, S w) { c.battery_level = level_value(v, w); }},
        {"all_specs", [](C& c, S v, S w) { c.all_specs = to_bool(v, w); }}}},
      {"hx",
       {{"mode",
         [](C& c, S v, S w) {
           if (v != "levels" && v != "jump" && v != "solve")
             throw ConfigError(w + ": mode must be levels, jump or solve");
           c.hx_mode = v;
         }},
        {"levels", [](C& c, S v, S w) { c.hx_levels = level_list(v, w); }},
        {"level", [](C& c, S v, S w) { c.hx_level = level_value(v, w); }},
        {"jumps", [](C& c, S v, S w) { c.jumps = double_list(v, w); }},
        {"alpha", [](C& c, S v, S w) { c.alpha = double_list(v, w); }},
        {"beta", [](C& c, S v, S w) { c.beta = double_list(v, w); }},
        {"tol",
         [](C& c, S v, S w) {
           c.tol = to_double(v, w);
           if (!(c.tol > 0)) throw ConfigError(w + ": tol must be positive");
         }},
        {"maxit",
         [](C& c, S v, S w) {
           auto x = to_int(v, w);
           if (x < 1) throw ConfigError(w + ": maxit must be positive");
           c.maxit = static_cast<int>(x);
         }}}},
  };
  return s;
}

void validate(const ExperimentConfig& c) {
  try {
    const auto& cat = mesh::catalog(c.geometry);
    for (const auto& g : c.gamma)
      if (!cat.find(g)) throw ConfigError("run.gamma: '" + g + "' is not an entity of " + c.geometry);
    for (const auto* list : {&c.alpha, &c.beta})
      if (!list->empty() && list->size() != cat.blocks.size())
        throw ConfigError("hx: alpha and beta need one value per block (" +
                          std::to_string(cat.blocks.size()) + ")");
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("run.geometry: ") + e.what());
  }
  for (const auto* list : {&c.alpha, &c.beta, &c.jumps})
    for (double x : *list)
      if (!(x > 0)) throw ConfigError("hx: coefficients must be positive, got " + num(x));
}

}  // namespace

std::string hex16(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "run.geometry=" << geometry << "\n"
     << "run.gamma=" << join(gamma) << "\n"
     << "run.route=" << route << "\n"
     << "run.seed=" << seed << "\n"
     << "mesh.level=" << mesh_level << "\n"
     << "decompose.level=" << decompose_level << "\n"
     << "decompose.field=" << field << "\n"
     << "decompose.amplitude=" << num(amplitude) << "\n"
     << "sweep.levels=" << join(sweep_levels) << "\n"
     << "sweep.samples=" << samples << "\n"
     << "sweep.ratio=" << ratio << "\n"
     << "sweep.trace_probe=" << trace_probe << "\n"
     << "battery.level=" << battery_level << "\n"
     << "battery.all_specs=" << all_specs << "\n"
     << "hx.mode=" << hx_mode << "\n"
     << "hx.levels=" << join(hx_levels) << "\n"
     << "hx.level=" << hx_level << "\n"
     << "hx.jumps=" << join(jumps) << "\n"
     << "hx.alpha=" << join(alpha) << "\n"
     << "hx.beta=" << join(beta) << "\n"
     << "hx.tol=" << num(tol) << "\n"
     << "hx.maxit=" << maxit << "\n";
  return os.str();
}

ExperimentConfig parse_config(std::istream& is, const std::string& source) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(source + ": key '" + section + "' outside of a section");
    auto sit = schema().find(section);
    if (sit == schema().end()) throw ConfigError(source + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      auto kit = sit->second.find(key);
      if (kit == sit->second.end())
        throw ConfigError(source + ": unknown key '" + section + "." + key + "'");
      kit->second(c, value.data(), source + " " + section + "." + key);
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(f, path);
}

}  // namespace helmdec::cli

#ifndef VPME_CONFIG_HPP
#define VPME_CONFIG_HPP

/* Strict `key = value` run configuration.
 *
 * Format: one assignment per line, full-line comments starting with '#',
 * blank lines ignored.  Unknown keys, duplicate keys, and malformed values
 * are fatal; a typo in a tolerance key must never silently weaken a
 * verification claim.
 *
 * Keys and defaults:
 *   dim = 1                torus dimension, 1 or 2
 *   grid = 128             cells per axis (power of two)
 *   n_particles = 10000
 *   dt = 0.001
 *   t_final = 1
 *   output_interval = 0.1
 *   mollifier_r = none     regularisation width, "none" disables
 *   deposition = linear
 *   seed = 1
 *   newton_tol = 1e-10
 *   newton_max_iters = 50
 *   kind = uniform         initial data: uniform | perturbed | two-stream
 *   temperature = 1
 *   amplitude = 0
 *   mode = 1
 *   drift = 0
 *   k0 = 6
 *   m0 = 4
 *   perturb_dx = 0         coupled-run position shift
 *   perturb_dv = 0         coupled-run velocity shift
 *   subsample = 1024       particles behind the exact-W2 estimate
 *   trials = 100           pairs per inequality sweep
 */

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "vpme/particles.hpp"

namespace vpme {

struct RunConfig {
  SimConfig sim;
  double perturb_dx = 0.0;
  double perturb_dv = 0.0;
  std::size_t subsample = 1024;
  int trials = 100;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& v, const std::string& where) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty())
    throw ParseError(where + ": bad number '" + v + "'");
  return x;
}

inline long long parse_int(const std::string& v, const std::string& where) {
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty())
    throw ParseError(where + ": bad integer '" + v + "'");
  return x;
}

inline uint64_t parse_seed(const std::string& v, const std::string& where) {
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty() || v[0] == '-')
    throw ParseError(where + ": bad seed '" + v + "'");
  return x;
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text,
                                   const std::string& name = "<config>") {
  RunConfig rc;
  int dim = 1;
  int grid_n = 128;

  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = name + ":" + std::to_string(lineno);
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;

    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError(where + ": expected 'key = value'");
    std::string key = detail::trim(s.substr(0, eq));
    std::string val = detail::trim(s.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ParseError(where + ": expected 'key = value'");
    if (!seen.insert(key).second)
      throw ParseError(where + ": duplicate key '" + key + "'");

    if (key == "dim") {
      dim = static_cast<int>(detail::parse_int(val, where));
    } else if (key == "grid") {
      grid_n = static_cast<int>(detail::parse_int(val, where));
    } else if (key == "n_particles") {
      long long n = detail::parse_int(val, where);
      if (n < 0) throw ParseError(where + ": n_particles must be positive");
      rc.sim.n_particles = static_cast<std::size_t>(n);
    } else if (key == "dt") {
      rc.sim.dt = detail::parse_double(val, where);
    } else if (key == "t_final") {
      rc.sim.t_final = detail::parse_double(val, where);
    } else if (key == "output_interval") {
      rc.sim.output_interval = detail::parse_double(val, where);
    } else if (key == "mollifier_r") {
      rc.sim.mollifier_r = val == "none" ? 0.0 : detail::parse_double(val, where);
    } else if (key == "deposition") {
      rc.sim.deposition = val;
    } else if (key == "seed") {
      rc.sim.seed = detail::parse_seed(val, where);
    } else if (key == "newton_tol") {
      rc.sim.newton.tol = detail::parse_double(val, where);
    } else if (key == "newton_max_iters") {
      rc.sim.newton.max_iters =
          static_cast<int>(detail::parse_int(val, where));
    } else if (key == "kind") {
      if (val == "uniform")
        rc.sim.initial.kind = InitialData::Kind::UniformMaxwellian;
      else if (val == "perturbed")
        rc.sim.initial.kind = InitialData::Kind::PerturbedMaxwellian;
      else if (val == "two-stream")
        rc.sim.initial.kind = InitialData::Kind::TwoStream;
      else
        throw UnknownKind(where + ": kind '" + val +
                          "' (uniform | perturbed | two-stream)");
    } else if (key == "temperature") {
      rc.sim.initial.temperature = detail::parse_double(val, where);
    } else if (key == "amplitude") {
      rc.sim.initial.amplitude = detail::parse_double(val, where);
    } else if (key == "mode") {
      rc.sim.initial.mode = static_cast<int>(detail::parse_int(val, where));
    } else if (key == "drift") {
      rc.sim.initial.drift = detail::parse_double(val, where);
    } else if (key == "k0") {
      rc.sim.initial.k0 = detail::parse_double(val, where);
    } else if (key == "m0") {
      rc.sim.initial.m0 = detail::parse_double(val, where);
    } else if (key == "perturb_dx") {
      rc.perturb_dx = detail::parse_double(val, where);
    } else if (key == "perturb_dv") {
      rc.perturb_dv = detail::parse_double(val, where);
    } else if (key == "subsample") {
      long long n = detail::parse_int(val, where);
      if (n <= 0) throw ParseError(where + ": subsample must be positive");
      rc.subsample = static_cast<std::size_t>(n);
    } else if (key == "trials") {
      rc.trials = static_cast<int>(detail::parse_int(val, where));
    } else {
      throw UnknownKey(name + ": unknown key '" + key + "'");
    }
  }

  rc.sim.grid = TorusGrid{dim, grid_n};
  return rc;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), path);
}

/* %.17g round-trips binary64 exactly, so parse(serialise(c)) == c */
inline std::string serialise_config(const RunConfig& rc) {
  auto g17 = [](double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.17g", x);
    return std::string(b);
  };
  const char* kind = "uniform";
  if (rc.sim.initial.kind == InitialData::Kind::PerturbedMaxwellian)
    kind = "perturbed";
  else if (rc.sim.initial.kind == InitialData::Kind::TwoStream)
    kind = "two-stream";
  else if (rc.sim.initial.kind == InitialData::Kind::Custom)
    throw ConfigError("serialise_config: custom initial data has no text form");

  std::ostringstream out;
  out << "dim = " << rc.sim.grid.dim << "\n"
      << "grid = " << rc.sim.grid.n << "\n"
      << "n_particles = " << rc.sim.n_particles << "\n"
      << "dt = " << g17(rc.sim.dt) << "\n"
      << "t_final = " << g17(rc.sim.t_final) << "\n"
      << "output_interval = " << g17(rc.sim.output_interval) << "\n"
      << "mollifier_r = "
      << (rc.sim.mollifier_r == 0.0 ? std::string("none")
                                    : g17(rc.sim.mollifier_r))
      << "\n"
      << "deposition = " << rc.sim.deposition << "\n"
      << "seed = " << rc.sim.seed << "\n"
      << "newton_tol = " << g17(rc.sim.newton.tol) << "\n"
      << "newton_max_iters = " << rc.sim.newton.max_iters << "\n"
      << "kind = " << kind << "\n"
      << "temperature = " << g17(rc.sim.initial.temperature) << "\n"
      << "amplitude = " << g17(rc.sim.initial.amplitude) << "\n"
      << "mode = " << rc.sim.initial.mode << "\n"
      << "drift = " << g17(rc.sim.initial.drift) << "\n"
      << "k0 = " << g17(rc.sim.initial.k0) << "\n"
      << "m0 = " << g17(rc.sim.initial.m0) << "\n"
      << "perturb_dx = " << g17(rc.perturb_dx) << "\n"
      << "perturb_dv = " << g17(rc.perturb_dv) << "\n"
      << "subsample = " << rc.subsample << "\n"
      << "trials = " << rc.trials << "\n";
  return out.str();
}

}  // namespace vpme

#endif

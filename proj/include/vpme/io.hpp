#ifndef VPME_IO_HPP
#define VPME_IO_HPP

/* Plain-text snapshot and table formats.
 *
 * Field:     "# torus d=<dim> n=<cells>" then one value per line, row-major.
 * Particles: "# particles n=<N> d=<dim> seed=<s>" then one particle per
 *            line: dim position coords, dim velocity coords, weight.
 *
 * Everything numeric is written with %.17g so a read-back is bit-exact.
 * Run artefacts that must land atomically (the manifest) go through a
 * temp-file rename.
 */

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vpme/grid.hpp"
#include "vpme/particles.hpp"

namespace vpme {
namespace io {

inline std::string g17(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.17g", x);
  return std::string(b);
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("io: cannot open '" + path + "' for writing");
  f << body;
  if (!f) throw ConfigError("io: short write to '" + path + "'");
}

/* write-then-rename so a crashed run never leaves a half manifest */
inline void write_text_atomic(const std::string& path,
                              const std::string& body) {
  std::string tmp = path + ".tmp";
  write_text(tmp, body);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw ConfigError("io: rename '" + tmp + "' -> '" + path +
                      "': " + ec.message());
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("io: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

inline std::string format_field(const ScalarField& f) {
  std::ostringstream out;
  out << "# torus d=" << f.grid.dim << " n=" << f.grid.n << "\n";
  for (double v : f.v) out << g17(v) << "\n";
  return out.str();
}

inline void write_field(const std::string& path, const ScalarField& f) {
  write_text(path, format_field(f));
}

inline ScalarField read_field(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string header;
  if (!std::getline(in, header))
    throw ParseError(path + ": empty field file");
  int dim = 0, n = 0;
  if (std::sscanf(header.c_str(), "# torus d=%d n=%d", &dim, &n) != 2)
    throw ParseError(path + ": bad field header '" + header + "'");
  ScalarField f(TorusGrid{dim, n});
  std::string line;
  for (std::size_t i = 0; i < f.v.size(); ++i) {
    if (!std::getline(in, line))
      throw ParseError(path + ": truncated field data");
    char* end = nullptr;
    f.v[i] = std::strtod(line.c_str(), &end);
    if (end == line.c_str())
      throw ParseError(path + ": bad value '" + line + "'");
  }
  return f;
}

inline std::string format_particles(const ParticleEnsemble& e) {
  std::ostringstream out;
  out << "# particles n=" << e.n << " d=" << e.dim << " seed=" << e.rng_seed
      << "\n";
  for (std::size_t p = 0; p < e.n; ++p) {
    for (int k = 0; k < e.dim; ++k) out << g17(e.x[p * e.dim + k]) << " ";
    for (int k = 0; k < e.dim; ++k) out << g17(e.v[p * e.dim + k]) << " ";
    out << g17(e.w[p]) << "\n";
  }
  return out.str();
}

inline void write_particles(const std::string& path,
                            const ParticleEnsemble& e) {
  write_text(path, format_particles(e));
}

inline ParticleEnsemble read_particles(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string header;
  if (!std::getline(in, header))
    throw ParseError(path + ": empty particle file");
  unsigned long long n = 0, seed = 0;
  int dim = 0;
  if (std::sscanf(header.c_str(), "# particles n=%llu d=%d seed=%llu", &n,
                  &dim, &seed) != 3)
    throw ParseError(path + ": bad particle header '" + header + "'");
  ParticleEnsemble e;
  e.dim = dim;
  e.n = static_cast<std::size_t>(n);
  e.rng_seed = seed;
  e.x.resize(e.n * dim);
  e.v.resize(e.n * dim);
  e.w.resize(e.n);
  std::string line;
  for (std::size_t p = 0; p < e.n; ++p) {
    if (!std::getline(in, line))
      throw ParseError(path + ": truncated particle data");
    std::istringstream row(line);
    for (int k = 0; k < dim; ++k)
      if (!(row >> e.x[p * dim + k]))
        throw ParseError(path + ": bad particle row '" + line + "'");
    for (int k = 0; k < dim; ++k)
      if (!(row >> e.v[p * dim + k]))
        throw ParseError(path + ": bad particle row '" + line + "'");
    if (!(row >> e.w[p]))
      throw ParseError(path + ": bad particle row '" + line + "'");
  }
  return e;
}

/* Minimal CSV accumulator: a header row, then %.17g cells.  No quoting,
 * column names must not contain commas. */
struct CsvTable {
  std::vector<std::string> columns;
  std::ostringstream body;

  explicit CsvTable(std::vector<std::string> cols)
      : columns(std::move(cols)) {}

  void row(const std::vector<double>& cells) {
    if (cells.size() != columns.size())
      throw DomainError("csv: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) body << ",";
      body << g17(cells[i]);
    }
    body << "\n";
  }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out += ",";
      out += columns[i];
    }
    out += "\n";
    out += body.str();
    return out;
  }

  void write(const std::string& path) const { write_text(path, str()); }
};

}  // namespace io
}  // namespace vpme

#endif

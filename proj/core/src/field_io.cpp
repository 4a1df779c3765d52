#include "dvdflow/field_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dvdflow {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_snapshot(std::ostream& os, const Field& f, double time) {
  const UniformGrid& g = f.grid;
  os << "# " << g.dim << ' ' << g.nx << ' ' << g.ny << ' '
     << format_double(g.lx) << ' ' << format_double(g.ly) << ' '
     << format_double(time) << '\n';
  for (int i = 0; i < f.size(); ++i) os << format_double(f[i]) << '\n';
  if (!os) throw IoError("snapshot write failed");
}

void write_snapshot_file(const std::string& path, const Field& f,
                         double time) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_snapshot(os, f, time);
}

Snapshot read_snapshot(std::istream& is, BoundaryKind bc) {
  std::string header;
  if (!std::getline(is, header) || header.empty() || header[0] != '#')
    throw IoError("snapshot must start with a '#' header line");
  std::istringstream hs(header.substr(1));
  int dim = 0, nx = 0, ny = 0;
  double lx = 0.0, ly = 0.0, time = 0.0;
  if (!(hs >> dim >> nx >> ny >> lx >> ly >> time))
    throw IoError("snapshot header must be '# dim nx ny lx ly time'");
  std::string rest;
  if (hs >> rest) throw IoError("trailing tokens in snapshot header");

  UniformGrid grid;
  try {
    grid = dim == 2 ? make_grid_2d(nx, ny, lx, ly, bc)
                    : make_grid_1d(nx, lx, bc);
  } catch (const GridError& e) {
    throw IoError(std::string("snapshot header invalid: ") + e.what());
  }
  if (dim != 1 && dim != 2) throw IoError("snapshot dim must be 1 or 2");

  Snapshot snap;
  snap.field = Field(grid);
  snap.time = time;
  for (int i = 0; i < snap.field.size(); ++i) {
    if (!(is >> snap.field[i]))
      throw IoError("snapshot ended after " + std::to_string(i) + " of " +
                    std::to_string(snap.field.size()) + " values");
  }
  std::string trailing;
  if (is >> trailing) throw IoError("trailing data after snapshot values");
  return snap;
}

Snapshot read_snapshot_file(const std::string& path, BoundaryKind bc) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return read_snapshot(is, bc);
}

}  // namespace dvdflow

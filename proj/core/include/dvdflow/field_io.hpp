#pragma once

// Plain-text field snapshots: a one-line header
//   # dim nx ny lx ly time
// followed by one cell value per line in row-major order, printed with 17
// significant digits so that parsing a written snapshot reproduces the values
// bit for bit.  1D fields store ny = 1 and ly = 0.  The boundary kind is run
// configuration, not data, so the reader takes it as a parameter.

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "dvdflow/grid.hpp"

namespace dvdflow {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct Snapshot {
  Field field;
  double time = 0.0;
};

void write_snapshot(std::ostream& os, const Field& f, double time);
void write_snapshot_file(const std::string& path, const Field& f, double time);

Snapshot read_snapshot(std::istream& is,
                       BoundaryKind bc = BoundaryKind::Periodic);
Snapshot read_snapshot_file(const std::string& path,
                            BoundaryKind bc = BoundaryKind::Periodic);

/// Shortest-in-file, exact-on-parse formatting used by all text outputs:
/// %.17g.
std::string format_double(double v);

}  // namespace dvdflow

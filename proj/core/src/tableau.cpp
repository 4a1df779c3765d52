#include "dvdflow/tableau.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace dvdflow {

namespace {

Rational rat(long long num, long long den = 1) { return Rational(num, den); }

std::string format_rational(const Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

Rational parse_rational(const std::string& token) {
  const auto slash = token.find('/');
  try {
    std::size_t used = 0;
    const long long num = std::stoll(token.substr(0, slash), &used);
    if (used != (slash == std::string::npos ? token.size() : slash))
      throw TableauError("bad rational token '" + token + "'");
    long long den = 1;
    if (slash != std::string::npos) {
      const std::string ds = token.substr(slash + 1);
      den = std::stoll(ds, &used);
      if (used != ds.size() || den == 0)
        throw TableauError("bad rational token '" + token + "'");
    }
    return Rational(num, den);
  } catch (const TableauError&) {
    throw;
  } catch (const std::exception&) {
    throw TableauError("bad rational token '" + token + "'");
  }
}

int nu_from_pair_count(int nhat) {
  for (int nu = 1; nu <= 64; ++nu)
    if (pair_count(nu) == nhat) return nu;
  throw TableauError("matrix size " + std::to_string(nhat) +
                     " is not nu*(nu+1)/2 for any nu");
}

// Solves sys.constraints * v = sys.rhs over the rationals by Gaussian
// elimination.  Returns a particular solution (free variables zero) and a
// null-space basis, or nullopt when inconsistent.
struct AffineSolutionSet {
  std::vector<Rational> particular;
  std::vector<std::vector<Rational>> basis;
};

std::optional<AffineSolutionSet> solve_affine(const PartitionSystem& sys) {
  RationalMatrix m = sys.constraints;
  std::vector<Rational> rhs = sys.rhs;
  const int rows = static_cast<int>(m.size());
  const int cols = rows ? static_cast<int>(m[0].size()) : 0;

  std::vector<int> pivot_col;
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int pr = -1;
    for (int i = r; i < rows; ++i)
      if (m[i][c] != rat(0)) { pr = i; break; }
    if (pr < 0) continue;
    std::swap(m[pr], m[r]);
    std::swap(rhs[pr], rhs[r]);
    const Rational inv = m[r][c];
    for (int j = c; j < cols; ++j) m[r][j] /= inv;
    rhs[r] /= inv;
    for (int i = 0; i < rows; ++i) {
      if (i == r || m[i][c] == rat(0)) continue;
      const Rational f = m[i][c];
      for (int j = c; j < cols; ++j) m[i][j] -= f * m[r][j];
      rhs[i] -= f * rhs[r];
    }
    pivot_col.push_back(c);
    ++r;
  }
  for (int i = r; i < rows; ++i)
    if (rhs[i] != rat(0)) return std::nullopt;

  std::vector<bool> is_pivot(cols, false);
  for (int c : pivot_col) is_pivot[c] = true;

  AffineSolutionSet out;
  out.particular.assign(cols, rat(0));
  for (int p = 0; p < static_cast<int>(pivot_col.size()); ++p)
    out.particular[pivot_col[p]] = rhs[p];
  for (int c = 0; c < cols; ++c) {
    if (is_pivot[c]) continue;
    std::vector<Rational> n(cols, rat(0));
    n[c] = rat(1);
    for (int p = 0; p < static_cast<int>(pivot_col.size()); ++p)
      n[pivot_col[p]] = -m[p][c];
    out.basis.push_back(std::move(n));
  }
  return out;
}

// Nearest continued-fraction convergent of x with denominator <= max_den.
Rational rationalize(double x, long long max_den) {
  const bool neg = x < 0;
  double y = std::abs(x);
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int it = 0; it < 64; ++it) {
    const double fl = std::floor(y);
    if (fl > 9.0e17) break;
    const long long a = static_cast<long long>(fl);
    if (q0 + a * q1 > max_den &&
        q1 != 0) {  // next convergent would exceed the bound
      break;
    }
    const long long p2 = a * p1 + p0;
    const long long q2 = a * q1 + q0;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    const double frac = y - fl;
    if (frac < 1e-15) break;
    y = 1.0 / frac;
  }
  if (q1 == 0) return rat(0);
  return Rational(neg ? -p1 : p1, q1);
}

using Int128 = __int128;

Int128 int128_abs(Int128 v) { return v < 0 ? -v : v; }

// Fraction-free Bareiss determinant of an integer matrix (destroys m).
Int128 bareiss_determinant(std::vector<std::vector<Int128>>& m) {
  const int n = static_cast<int>(m.size());
  Int128 sign = 1;
  Int128 prev = 1;
  for (int k = 0; k + 1 < n; ++k) {
    if (m[k][k] == 0) {
      int sw = -1;
      for (int i = k + 1; i < n; ++i)
        if (m[i][k] != 0) { sw = i; break; }
      if (sw < 0) return 0;
      std::swap(m[k], m[sw]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i) {
      for (int j = k + 1; j < n; ++j)
        m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
      m[i][k] = 0;
    }
    prev = m[k][k];
  }
  return n ? sign * m[n - 1][n - 1] : 1;
}

}  // namespace

int pair_count(int nu) {
  if (nu < 1) throw TableauError("stage count must be positive");
  return nu * (nu + 1) / 2;
}

PairIndex pair_index(int i, int j, int nu) {
  if (nu < 1 || j < 0 || i <= j || i > nu)
    throw TableauError("invalid stage pair (" + std::to_string(i) + "," +
                       std::to_string(j) + ") for nu=" + std::to_string(nu));
  PairIndex p;
  p.i = i;
  p.j = j;
  p.k = j * (2 * nu - j + 1) / 2 + (i - j);
  return p;
}

PairIndex pair_from_linear(int k, int nu) {
  if (k < 1 || k > pair_count(nu))
    throw TableauError("pair index " + std::to_string(k) +
                       " out of range for nu=" + std::to_string(nu));
  for (int j = 0; j < nu; ++j) {
    const int base = j * (2 * nu - j + 1) / 2;
    const int span = nu - j;  // pairs (j+1..nu, j)
    if (k <= base + span) {
      PairIndex p;
      p.i = j + (k - base);
      p.j = j;
      p.k = k;
      return p;
    }
  }
  throw TableauError("pair index decode failed");  // unreachable
}

std::vector<PairIndex> pair_list(int nu) {
  std::vector<PairIndex> out;
  out.reserve(pair_count(nu));
  for (int k = 1; k <= pair_count(nu); ++k) out.push_back(pair_from_linear(k, nu));
  return out;
}

void validate_tableau(const DvdTableau& tab) {
  if (tab.nu < 1) throw TableauError("tableau has no stages");
  const int nhat = pair_count(tab.nu);
  if (static_cast<int>(tab.nodes.size()) != tab.nu)
    throw TableauError("tableau node count does not match stage count");
  if (static_cast<int>(tab.rows.size()) != tab.nu)
    throw TableauError("tableau row count does not match stage count");
  for (int i = 0; i < tab.nu; ++i) {
    if (static_cast<int>(tab.rows[i].size()) != nhat)
      throw TableauError("tableau row " + std::to_string(i + 1) +
                         " has wrong length");
    Rational sum(0);
    for (const Rational& a : tab.rows[i]) sum += a;
    if (sum != tab.nodes[i])
      throw TableauError("row sum of stage " + std::to_string(i + 1) +
                         " (" + format_rational(sum) + ") does not equal node " +
                         format_rational(tab.nodes[i]));
  }
}

const DvdTableau& builtin_tableau(const std::string& name) {
  static const std::map<std::string, DvdTableau> catalog = [] {
    std::map<std::string, DvdTableau> m;
    {
      DvdTableau t;
      t.nu = 1; t.order = 2;
      t.nodes = {rat(1)};
      t.rows = {{rat(1)}};
      m["Sch-1"] = t;
    }
    {
      DvdTableau t;
      t.nu = 2; t.order = 3;
      t.nodes = {rat(1, 3), rat(1)};
      t.rows = {{rat(7, 18), rat(-1, 6), rat(1, 9)},
                {rat(1, 2), rat(-1, 2), rat(1)}};
      m["Sch-2"] = t;
    }
    {
      DvdTableau t;
      t.nu = 2; t.order = 4;
      t.nodes = {rat(1, 2), rat(1)};
      t.rows = {{rat(7, 12), rat(-1, 6), rat(1, 12)},
                {rat(2, 3), rat(-1, 3), rat(2, 3)}};
      m["Sch-3"] = t;
    }
    {
      DvdTableau t;
      t.nu = 3; t.order = 4;
      t.nodes = {rat(1, 3), rat(2, 3), rat(1)};
      t.rows = {
          {rat(25, 72), rat(0), rat(-1, 24), rat(1, 72), rat(0), rat(1, 72)},
          {rat(13, 36), rat(0), rat(-1, 12), rat(13, 36), rat(0), rat(1, 36)},
          {rat(3, 8), rat(0), rat(-1, 8), rat(3, 8), rat(0), rat(3, 8)}};
      m["Sch-4"] = t;
    }
    for (const auto& [k, v] : m) validate_tableau(v);
    return m;
  }();
  const auto it = catalog.find(name);
  if (it == catalog.end())
    throw TableauError("unknown built-in tableau '" + name + "'");
  return it->second;
}

std::vector<std::string> builtin_tableau_names() {
  return {"Sch-1", "Sch-2", "Sch-3", "Sch-4"};
}

const std::vector<Rational>& builtin_partition_vector(const std::string& name) {
  static const std::map<std::string, std::vector<Rational>> catalog = {
      {"Sch-1", {rat(1)}},
      {"Sch-2", {rat(3, 2), rat(-1, 2), rat(3, 2)}},
      {"Sch-3", {rat(4, 3), rat(-1, 3), rat(4, 3)}},
      {"Sch-4",
       {rat(9, 8), rat(0), rat(-1, 8), rat(9, 8), rat(0), rat(9, 8)}},
  };
  const auto it = catalog.find(name);
  if (it == catalog.end())
    throw TableauError("no partition vector for tableau '" + name + "'");
  return it->second;
}

RationalMatrix expand_matrix(const DvdTableau& tab) {
  validate_tableau(tab);
  const int nhat = pair_count(tab.nu);
  RationalMatrix a(nhat, std::vector<Rational>(nhat, rat(0)));
  for (const PairIndex& p : pair_list(tab.nu)) {
    for (int c = 0; c < nhat; ++c) {
      Rational val = tab.rows[p.i - 1][c];
      if (p.j >= 1) val -= tab.rows[p.j - 1][c];
      a[p.k - 1][c] = val;
    }
  }
  return a;
}

PartitionSystem unit_partition_system(int nu) {
  const int nhat = pair_count(nu);
  PartitionSystem sys;
  sys.constraints.assign(nu + 1, std::vector<Rational>(nhat, rat(0)));
  sys.rhs.assign(nu + 1, rat(0));
  for (const PairIndex& p : pair_list(nu)) {
    sys.constraints[p.i][p.k - 1] += rat(1);
    sys.constraints[p.j][p.k - 1] -= rat(1);
  }
  sys.rhs[0] = rat(-1);
  sys.rhs[nu] = rat(1);
  return sys;
}

StabilityCertificate build_certificate(const RationalMatrix& a,
                                       const std::vector<Rational>& v) {
  const int nhat = static_cast<int>(a.size());
  if (nhat == 0 || static_cast<int>(v.size()) != nhat)
    throw TableauError("certificate dimensions are inconsistent");
  for (const auto& row : a)
    if (static_cast<int>(row.size()) != nhat)
      throw TableauError("expanded matrix is not square");
  const int nu = nu_from_pair_count(nhat);

  const PartitionSystem sys = unit_partition_system(nu);
  for (int m = 0; m <= nu; ++m) {
    Rational acc(0);
    for (int k = 0; k < nhat; ++k) acc += sys.constraints[m][k] * v[k];
    if (acc != sys.rhs[m])
      throw TableauError("vector violates unit-partition constraint at level " +
                         std::to_string(m));
  }

  StabilityCertificate cert;
  cert.v = v;
  cert.b.assign(nhat, std::vector<Rational>(nhat, rat(0)));
  for (int r = 0; r < nhat; ++r)
    for (int c = 0; c < nhat; ++c)
      cert.b[r][c] = (v[r] * a[r][c] + v[c] * a[c][r]) / rat(2);
  cert.min_eigenvalue = min_eigenvalue(to_double(cert.b));
  return cert;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw TableauError("matrix is not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues()(0);
}

bool is_psd(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw TableauError("matrix is not square");
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = r + 1; c < m.cols(); ++c) {
      const double scale =
          std::max({1.0, std::abs(m(r, c)), std::abs(m(c, r))});
      if (std::abs(m(r, c) - m(c, r)) > 1e-12 * scale)
        throw TableauError("is_psd requires a symmetric matrix");
    }
  return min_eigenvalue(m) >= -tol;
}

bool is_psd_exact(const RationalMatrix& m) {
  const int n = static_cast<int>(m.size());
  if (n == 0 || n > 8)
    throw TableauError("exact PSD check supports 1 <= n <= 8");
  for (int r = 0; r < n; ++r) {
    if (static_cast<int>(m[r].size()) != n)
      throw TableauError("matrix is not square");
    for (int c = 0; c < n; ++c)
      if (m[r][c] != m[c][r])
        throw TableauError("exact PSD check requires a symmetric matrix");
  }

  long long lcm = 1;
  Int128 max_abs_num = 1;
  for (const auto& row : m)
    for (const Rational& e : row) {
      lcm = std::lcm(lcm, e.denominator());
      if (lcm > (1ll << 40)) throw TableauError("denominators too large for exact check");
    }
  std::vector<std::vector<Int128>> scaled(n, std::vector<Int128>(n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      scaled[r][c] = Int128(m[r][c].numerator()) * (lcm / m[r][c].denominator());
      max_abs_num = std::max(max_abs_num, int128_abs(scaled[r][c]));
    }
  // Hadamard bound keeps Bareiss intermediates inside 128 bits.
  const double bound_bits =
      n * (0.5 * std::log2(double(n)) + std::log2(double(max_abs_num) + 1.0));
  if (bound_bits > 120.0)
    throw TableauError("entries too large for exact PSD check");

  // All principal minors (every index subset) must be nonnegative.
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> idx;
    for (int b = 0; b < n; ++b)
      if (mask & (1u << b)) idx.push_back(b);
    std::vector<std::vector<Int128>> sub(idx.size(),
                                         std::vector<Int128>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < idx.size(); ++c)
        sub[r][c] = scaled[idx[r]][idx[c]];
    if (bareiss_determinant(sub) < 0) return false;
  }
  return true;
}

Eigen::MatrixXd to_double(const RationalMatrix& m) {
  const int rows = static_cast<int>(m.size());
  const int cols = rows ? static_cast<int>(m[0].size()) : 0;
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(m[r].size()) != cols)
      throw TableauError("ragged rational matrix");
    for (int c = 0; c < cols; ++c)
      out(r, c) = boost::rational_cast<double>(m[r][c]);
  }
  return out;
}

Eigen::VectorXd to_double(const std::vector<Rational>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = boost::rational_cast<double>(v[i]);
  return out;
}

std::vector<Rational> lagrange_weights(const std::vector<Rational>& nodes,
                                       const Rational& a, const Rational& b) {
  const int n = static_cast<int>(nodes.size());
  if (n == 0) throw TableauError("lagrange_weights needs at least one node");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (nodes[i] == nodes[j])
        throw TableauError("duplicate quadrature node " + format_rational(nodes[i]));

  std::vector<Rational> weights(n, rat(0));
  for (int i = 0; i < n; ++i) {
    // numerator polynomial prod_{j != i} (t - t_j), coefficients low -> high
    std::vector<Rational> poly = {rat(1)};
    Rational den(1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      std::vector<Rational> next(poly.size() + 1, rat(0));
      for (std::size_t m = 0; m < poly.size(); ++m) {
        next[m + 1] += poly[m];
        next[m] -= nodes[j] * poly[m];
      }
      poly = std::move(next);
      den *= nodes[i] - nodes[j];
    }
    Rational integral(0);
    Rational pa = a, pb = b;  // running powers a^{m+1}, b^{m+1}
    for (std::size_t m = 0; m < poly.size(); ++m) {
      integral += poly[m] * (pb - pa) / rat(static_cast<long long>(m) + 1);
      pa *= a;
      pb *= b;
    }
    weights[i] = integral / den;
  }
  return weights;
}

DvdTableau construct_tableau(int nu, int order,
                             const std::vector<Rational>& nodes,
                             const std::vector<PairIndex>& quadrature_pairs,
                             const RationalMatrix& corrections) {
  if (static_cast<int>(nodes.size()) != nu)
    throw TableauError("node count does not match stage count");
  if (quadrature_pairs.empty())
    throw TableauError("quadrature pair selection is empty");
  const int nhat = pair_count(nu);

  // Effective abscissa of pair (i,j) is the midpoint of its stage nodes,
  // with stage 0 pinned at time 0.
  std::vector<Rational> midpoints;
  std::vector<int> columns;
  for (const PairIndex& sel : quadrature_pairs) {
    const PairIndex p = pair_index(sel.i, sel.j, nu);  // re-derives and checks k
    const Rational ci = nodes[p.i - 1];
    const Rational cj = p.j == 0 ? rat(0) : nodes[p.j - 1];
    midpoints.push_back((ci + cj) / rat(2));
    columns.push_back(p.k - 1);
  }
  for (std::size_t i = 0; i < midpoints.size(); ++i)
    for (std::size_t j = i + 1; j < midpoints.size(); ++j)
      if (midpoints[i] == midpoints[j])
        throw TableauError("quadrature pairs share the midpoint " +
                           format_rational(midpoints[i]));

  if (!corrections.empty() && static_cast<int>(corrections.size()) != nu)
    throw TableauError("corrections must supply one row per stage");

  DvdTableau tab;
  tab.nu = nu;
  tab.order = order;
  tab.nodes = nodes;
  tab.rows.assign(nu, std::vector<Rational>(nhat, rat(0)));
  for (int i = 0; i < nu; ++i) {
    const std::vector<Rational> w = lagrange_weights(midpoints, rat(0), nodes[i]);
    for (std::size_t q = 0; q < columns.size(); ++q)
      tab.rows[i][columns[q]] += w[q];
    if (!corrections.empty()) {
      if (static_cast<int>(corrections[i].size()) != nhat)
        throw TableauError("correction row " + std::to_string(i + 1) +
                           " has wrong length");
      for (int c = 0; c < nhat; ++c) tab.rows[i][c] += corrections[i][c];
    }
  }
  validate_tableau(tab);  // rejects corrections that break the row sums
  return tab;
}

std::optional<StabilityCertificate> find_partition_vector(
    const RationalMatrix& a, int nu, double tol) {
  const int nhat = pair_count(nu);
  if (static_cast<int>(a.size()) != nhat)
    throw TableauError("expanded matrix size does not match nu");

  const auto sol = solve_affine(unit_partition_system(nu));
  if (!sol) return std::nullopt;
  const int d = static_cast<int>(sol->basis.size());

  const Eigen::MatrixXd ad = to_double(a);
  const Eigen::VectorXd pd = to_double(sol->particular);
  Eigen::MatrixXd nd(nhat, std::max(d, 1));
  for (int r = 0; r < d; ++r) nd.col(r) = to_double(sol->basis[r]);

  const auto eval = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd v = pd;
    for (int r = 0; r < d; ++r) v += t(r) * nd.col(r);
    const Eigen::MatrixXd va = v.asDiagonal() * ad;
    const Eigen::MatrixXd b = 0.5 * (va + va.transpose());
    return min_eigenvalue(b);
  };

  Eigen::VectorXd best_t = Eigen::VectorXd::Zero(d);
  double best = eval(best_t);

  if (d > 0) {
    // Coarse scan of the free parameters, then pattern-search refinement.
    std::vector<Eigen::VectorXd> starts;
    if (d <= 3) {
      const int steps = 17;
      std::vector<int> counter(d, 0);
      for (;;) {
        Eigen::VectorXd t(d);
        for (int r = 0; r < d; ++r) t(r) = -4.0 + 0.5 * counter[r];
        starts.push_back(t);
        int carry = 0;
        while (carry < d && ++counter[carry] == steps) counter[carry++] = 0;
        if (carry == d) break;
      }
    } else {
      std::mt19937_64 rng(0x7ab1eau);
      starts.push_back(Eigen::VectorXd::Zero(d));
      for (int s = 0; s < 256; ++s) {
        Eigen::VectorXd t(d);
        for (int r = 0; r < d; ++r) {
          const double u = double(rng() >> 11) * 0x1p-53;
          t(r) = -4.0 + 8.0 * u;
        }
        starts.push_back(t);
      }
    }
    for (const Eigen::VectorXd& t : starts) {
      const double val = eval(t);
      if (val > best) { best = val; best_t = t; }
    }
    double step = 0.5;
    while (step > 1e-9) {
      bool improved = false;
      for (int r = 0; r < d; ++r) {
        for (const double dir : {+1.0, -1.0}) {
          Eigen::VectorXd t = best_t;
          t(r) += dir * step;
          const double val = eval(t);
          if (val > best) { best = val; best_t = t; improved = true; }
        }
      }
      if (!improved) step *= 0.5;
    }
  }

  if (best < -1e-8) return std::nullopt;  // infeasible beyond snapping rescue

  for (const long long max_den : {64ll, 4096ll, 1ll << 20, 1ll << 40}) {
    std::vector<Rational> v = sol->particular;
    for (int r = 0; r < d; ++r) {
      const Rational tr = rationalize(best_t(r), max_den);
      for (int k = 0; k < nhat; ++k) v[k] += tr * sol->basis[r][k];
    }
    StabilityCertificate cert = build_certificate(a, v);
    if (cert.min_eigenvalue >= -tol) return cert;
  }
  return std::nullopt;
}

void write_tableau(std::ostream& os, const DvdTableau& tab) {
  validate_tableau(tab);
  os << tab.nu << ' ' << tab.order << '\n';
  for (int i = 0; i < tab.nu; ++i)
    os << format_rational(tab.nodes[i]) << (i + 1 < tab.nu ? ' ' : '\n');
  for (const auto& row : tab.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      os << format_rational(row[c]) << (c + 1 < row.size() ? ' ' : '\n');
  }
}

DvdTableau read_tableau(std::istream& is) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      if (tok[0] == '#') break;  // rest of the line is a comment
      tokens.push_back(tok);
    }
  }
  std::size_t pos = 0;
  const auto next = [&]() -> const std::string& {
    if (pos >= tokens.size()) throw TableauError("catalog file ended early");
    return tokens[pos++];
  };

  DvdTableau tab;
  try {
    tab.nu = std::stoi(next());
    tab.order = std::stoi(next());
  } catch (const TableauError&) {
    throw;
  } catch (const std::exception&) {
    throw TableauError("catalog header must be 'nu order'");
  }
  if (tab.nu < 1 || tab.nu > 16)
    throw TableauError("catalog stage count out of range");
  for (int i = 0; i < tab.nu; ++i) tab.nodes.push_back(parse_rational(next()));
  const int nhat = pair_count(tab.nu);
  tab.rows.assign(tab.nu, {});
  for (int i = 0; i < tab.nu; ++i)
    for (int c = 0; c < nhat; ++c) tab.rows[i].push_back(parse_rational(next()));
  if (pos != tokens.size())
    throw TableauError("trailing tokens in catalog file");
  validate_tableau(tab);
  return tab;
}

}  // namespace dvdflow

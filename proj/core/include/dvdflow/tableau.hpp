#pragma once

// Coefficient tableaux for multi-stage discrete-variational-derivative (DVD)
// time integrators, together with their algebraic stability certificates.
//
// A scheme with nu stages advances phi_0 -> phi_nu through intermediate stages
// phi_1..phi_{nu-1}; every update is a weighted sum of discrete variational
// derivatives evaluated on stage *pairs* (i,j) with 0 <= j < i <= nu.  The
// pairs are enumerated by a linear index k = 1..nu*(nu+1)/2 and the scheme is
// defined by a nu x nu*(nu+1)/2 coefficient matrix plus stage nodes c_i.
//
// Stability is certified algebraically: expanding the tableau to the full
// pair-difference matrix A and finding a "unit partition" vector v such that
// B = (1/2)(diag(v) A + A^T diag(v)) is positive semidefinite guarantees
// unconditional energy dissipation of the time stepper for every step size.
//
// All tableau arithmetic is exact (rationals); floating point enters only in
// eigenvalue estimates and the numerical search for partition vectors.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>
#include <Eigen/Dense>

namespace dvdflow {

using Rational = boost::rational<long long>;
using RationalMatrix = std::vector<std::vector<Rational>>;

/// Raised on structurally invalid tableau data: bad stage indices, row-sum
/// violations, degenerate quadrature nodes, or malformed catalog files.
class TableauError : public std::runtime_error {
 public:
  explicit TableauError(const std::string& what) : std::runtime_error(what) {}
};

/// Number of stage pairs nu*(nu+1)/2 for a nu-stage scheme.
int pair_count(int nu);

/// A stage pair (i,j), 0 <= j < i <= nu, with its linear index k in
/// 1..pair_count(nu).  Stage 0 is the step's input state.
struct PairIndex {
  int i = 0;
  int j = 0;
  int k = 0;
};

/// Linear index of pair (i,j): k = j*(2*nu - j + 1)/2 + (i - j).
/// Throws TableauError unless 0 <= j < i <= nu.
PairIndex pair_index(int i, int j, int nu);

/// Inverse of pair_index.  Throws TableauError unless 1 <= k <= pair_count(nu).
PairIndex pair_from_linear(int k, int nu);

/// All pairs for a nu-stage scheme in linear-index order.
std::vector<PairIndex> pair_list(int nu);

/// Coefficient tableau of a nu-stage DVD scheme.  rows[i-1][k-1] weights the
/// variational derivative of pair k in the update of stage i; nodes[i-1] is
/// the abscissa c_i of stage i in units of the step size.
struct DvdTableau {
  int nu = 0;
  int order = 0;  ///< claimed convergence order
  std::vector<Rational> nodes;
  RationalMatrix rows;
};

/// Checks shape and the consistency condition sum_k rows[i][k] == nodes[i]
/// for every stage.  Throws TableauError on violation.
void validate_tableau(const DvdTableau& tab);

/// Built-in schemes: "Sch-1" (nu=1, order 2), "Sch-2" (nu=2, order 3),
/// "Sch-3" (nu=2, order 4), "Sch-4" (nu=3, order 4).
const DvdTableau& builtin_tableau(const std::string& name);
std::vector<std::string> builtin_tableau_names();

/// Known-good unit partition vector for a built-in tableau.
const std::vector<Rational>& builtin_partition_vector(const std::string& name);

/// Expands a tableau to the square pair-difference matrix A: rows k for pairs
/// (i,0) are the tableau rows themselves; rows for pairs (i,j), j >= 1, are
/// row_i - row_j.
RationalMatrix expand_matrix(const DvdTableau& tab);

/// Linear constraints defining unit partition vectors: constraints * v = rhs,
/// one row per energy level m = 0..nu, where row m sums +v_k over pairs with
/// i_k == m minus v_k over pairs with j_k == m, and rhs_m = [m==nu] - [m==0].
struct PartitionSystem {
  RationalMatrix constraints;  ///< (nu+1) x pair_count(nu)
  std::vector<Rational> rhs;
};

PartitionSystem unit_partition_system(int nu);

/// A certified (v, B) pair for an expanded matrix A.
struct StabilityCertificate {
  std::vector<Rational> v;
  RationalMatrix b;        ///< (1/2)(diag(v) A + A^T diag(v)), exact
  double min_eigenvalue;   ///< smallest eigenvalue of b in double precision
};

/// Assembles B = (1/2)(diag(v) A + A^T diag(v)) and its minimum eigenvalue.
/// Throws TableauError if v fails the unit-partition constraints or the
/// dimensions are inconsistent.
StabilityCertificate build_certificate(const RationalMatrix& a,
                                       const std::vector<Rational>& v);

/// Minimum eigenvalue of a symmetric matrix (double precision).
double min_eigenvalue(const Eigen::MatrixXd& m);

/// True when m is positive semidefinite up to tolerance: every eigenvalue
/// >= -tol.  Throws TableauError on non-symmetric input rather than
/// symmetrizing it silently.
bool is_psd(const Eigen::MatrixXd& m, double tol);

/// Exact rational PSD decision for small matrices (n <= 8): every principal
/// minor (all index subsets, not only leading) must be nonnegative.  Leading
/// minors alone would mis-certify singular indefinite matrices.
bool is_psd_exact(const RationalMatrix& m);

Eigen::MatrixXd to_double(const RationalMatrix& m);
Eigen::VectorXd to_double(const std::vector<Rational>& v);

/// Integrals of the Lagrange basis for the given distinct nodes over [a, b]:
/// w_i = int_a^b prod_{j != i} (t - t_j)/(t_i - t_j) dt, exact.
std::vector<Rational> lagrange_weights(const std::vector<Rational>& nodes,
                                       const Rational& a, const Rational& b);

/// Builds a nu-stage tableau from interpolatory quadrature: the variational
/// derivative of quadrature pair (i,j) is treated as a sample at the midpoint
/// (c_i + c_j)/2 (c_0 = 0), and row i integrates the Lagrange basis on these
/// midpoints over [0, c_i].  corrections, when nonempty, supplies one
/// zero-sum row per stage that is added on top (used to restore higher-order
/// conditions that plain quadrature misses).  Row sums are re-verified
/// against the nodes; violations throw.
DvdTableau construct_tableau(int nu, int order,
                             const std::vector<Rational>& nodes,
                             const std::vector<PairIndex>& quadrature_pairs,
                             const RationalMatrix& corrections = {});

/// Searches the affine family of unit-partition vectors for one whose B
/// matrix is PSD up to tol (min eigenvalue >= -tol).  Free parameters are
/// scanned on a coarse grid and refined by pattern search (the minimum
/// eigenvalue is concave along the family), then snapped to small rationals.
/// Returns nullopt when no certificate is found.
std::optional<StabilityCertificate> find_partition_vector(
    const RationalMatrix& a, int nu, double tol = 1e-12);

/// Catalog text format: header line "nu order", one line with the nu nodes,
/// then nu lines of pair_count(nu) coefficients; every rational is written as
/// "num/den".  Blank lines and lines starting with '#' are ignored on input.
void write_tableau(std::ostream& os, const DvdTableau& tab);
DvdTableau read_tableau(std::istream& is);

}  // namespace dvdflow

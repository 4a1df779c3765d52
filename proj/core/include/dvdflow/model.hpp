#pragma once

// Ginzburg-Landau free energy E[phi] = gamma/2 |grad phi|^2 + e1(phi) with the
// double-well potential density e1(phi) = (1 - phi^2)^2 / (4 eps^2), plus the
// beta-shifted splitting used by the linear relaxed integrators.
//
// The potential density contract is the PotentialDensity concept below;
// FreeeEnergy's double well is the only instance shipped.  Swapping the
// potential means providing another type that models the concept and using it
// where FreeEnergy is used today.

#include <concepts>

namespace dvdflow {

/// Which gradient flow the energy drives: L2 (G = -identity, nonconserved) or
/// Hminus1 (G = Laplacian, conserved order parameter).
enum class DissipationKind { L2, Hminus1 };

struct FreeEnergy {
  double gamma = 1.0;    ///< gradient-energy coefficient
  double epsilon = 0.1;  ///< interface-width parameter in the potential
  double beta = 0.0;     ///< splitting shift moved into the linear operator
  double c0 = 0.0;       ///< auxiliary-variable offset (keeps radicands positive)
  double domain_measure = 0.0;  ///< |Omega|, set from the grid in use

  double e1_density(double phi) const {
    const double w = 1.0 - phi * phi;
    return w * w / (4.0 * epsilon * epsilon);
  }

  double e1_derivative(double phi) const {
    return phi * (phi * phi - 1.0) / (epsilon * epsilon);
  }

  double e1_second_derivative(double phi) const {
    return (3.0 * phi * phi - 1.0) / (epsilon * epsilon);
  }

  /// Finite quotient (e1(a) - e1(b))/(a - b), continued through a == b where
  /// it equals e1_derivative(a).  Closed form, no cancellation:
  /// (a + b)(a^2 + b^2 - 2) / (4 eps^2).
  double e1_quotient(double a, double b) const {
    return (a + b) * (a * a + b * b - 2.0) / (4.0 * epsilon * epsilon);
  }

  /// Partial derivative of e1_quotient with respect to its first argument.
  double e1_quotient_da(double a, double b) const {
    return (3.0 * a * a + 2.0 * a * b + b * b - 2.0) /
           (4.0 * epsilon * epsilon);
  }

  /// Shifted potential (1 + beta - phi^2)^2 / (4 eps^2); together with the
  /// augmented linear operator -Delta + beta/eps^2 it reproduces the original
  /// energy up to the constant energy_offset() (for gamma = 1).
  double shifted_density(double phi) const {
    const double w = 1.0 + beta - phi * phi;
    return w * w / (4.0 * epsilon * epsilon);
  }

  double shifted_derivative(double phi) const {
    return phi * (phi * phi - 1.0 - beta) / (epsilon * epsilon);
  }

  /// Constant |Omega| (2 beta + beta^2) / (4 eps^2) by which the shifted
  /// splitting over-counts the original energy.
  double energy_offset() const {
    return domain_measure * (2.0 * beta + beta * beta) /
           (4.0 * epsilon * epsilon);
  }
};

/// Contract a replacement potential must satisfy.
template <typename P>
concept PotentialDensity = requires(const P p, double a, double b) {
  { p.e1_density(a) } -> std::convertible_to<double>;
  { p.e1_derivative(a) } -> std::convertible_to<double>;
  { p.e1_second_derivative(a) } -> std::convertible_to<double>;
  { p.e1_quotient(a, b) } -> std::convertible_to<double>;
  { p.e1_quotient_da(a, b) } -> std::convertible_to<double>;
  { p.shifted_density(a) } -> std::convertible_to<double>;
  { p.shifted_derivative(a) } -> std::convertible_to<double>;
};
static_assert(PotentialDensity<FreeEnergy>);

}  // namespace dvdflow

#pragma once

#include <cstdint>

namespace sq::spin {

/// Alkali atom with nuclear spin I. The two hyperfine manifolds have total
/// spins a = I + 1/2 and b = I - 1/2; for I = 1/2 the b manifold is the
/// single m = 0 state and carries no transverse variance.
struct AtomSpec {
    double nuclear_spin = 1.5;

    double a() const { return nuclear_spin + 0.5; }
    double b() const { return nuclear_spin - 0.5; }

    /// True when 2I is a positive integer (the only physical values).
    bool valid() const;
};

/// Spin-temperature parameter beta = ln[(1+P)/(1-P)].
/// Odd in P; throws std::domain_error for |P| >= 1.
double beta_from_polarization(double p);

/// Partition function of the spin-temperature distribution over both
/// manifolds: Z = sum_m e^{beta m} with m running over each manifold.
/// At beta = 0 this is the state count 2(2I+1).
double partition_function(const AtomSpec& atom, double beta);

/// Per-atom transverse spin variance <F_x^2> of the spin-temperature state:
///
///   sum_{m=-a}^{a} e^{beta m}[a(a+1)-m^2] / (2Z)  +  (same with b)
///
/// |P| = 1 is evaluated as the analytic stretched-state limit a/2. The sums
/// are computed with the dominant exponent factored out, so the result stays
/// finite for polarizations arbitrarily close to 1.
double variance_per_atom(const AtomSpec& atom, double p);

/// variance_per_atom(P) / variance_per_atom(0). Even in P; equals 2/3 in the
/// fully polarized limit for I = 3/2 and is identically 1 for I = 1/2.
double noise_ratio(const AtomSpec& atom, double p);

struct NoiseStatistics {
    double variance_per_atom = 0.0;
    double partition_function = 0.0; // +inf at |P| = 1
    double ratio_to_unpolarized = 0.0;
};

NoiseStatistics noise_statistics(const AtomSpec& atom, double p);

} // namespace sq::spin

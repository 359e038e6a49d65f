#include "spinqnd/spin_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sq::spin {

bool AtomSpec::valid() const {
    if (!(nuclear_spin >= 0.5)) return false;
    const double twice = 2.0 * nuclear_spin;
    return std::abs(twice - std::round(twice)) < 1e-9;
}

namespace {

void require_valid(const AtomSpec& atom) {
    if (!atom.valid())
        throw std::domain_error("nuclear spin must be a positive half-integer");
}

// Accumulates sum_m e^{beta(m - m_ref)} * weight(m) over one manifold.
// Factoring out the reference exponent keeps ratios finite at large |beta|.
template <typename WeightFn>
double manifold_sum(double f, double beta, double m_ref, WeightFn weight) {
    const int dim = static_cast<int>(std::lround(2.0 * f)) + 1;
    double acc = 0.0;
    for (int k = 0; k < dim; ++k) {
        const double m = -f + k;
        acc += std::exp(beta * (m - m_ref)) * weight(m);
    }
    return acc;
}

} // namespace

double beta_from_polarization(double p) {
    if (!(std::abs(p) < 1.0))
        throw std::domain_error("polarization must satisfy |P| < 1");
    // log1p keeps beta(-P) == -beta(P) exactly and is accurate near P = 0.
    return std::log1p(p) - std::log1p(-p);
}

double partition_function(const AtomSpec& atom, double beta) {
    require_valid(atom);
    const double m_ref = beta >= 0.0 ? atom.a() : -atom.a();
    double z = manifold_sum(atom.a(), beta, m_ref, [](double) { return 1.0; });
    if (atom.b() >= 0.0)
        z += manifold_sum(atom.b(), beta, m_ref, [](double) { return 1.0; });
    return z * std::exp(beta * m_ref);
}

double variance_per_atom(const AtomSpec& atom, double p) {
    require_valid(atom);
    if (!(std::abs(p) <= 1.0))
        throw std::domain_error("polarization must satisfy |P| <= 1");
    if (std::abs(p) == 1.0) {
        // Only the stretched state m = +-a survives: [a(a+1) - a^2]/2 = a/2.
        return atom.a() / 2.0;
    }
    const double beta = beta_from_polarization(p);
    const double m_ref = beta >= 0.0 ? atom.a() : -atom.a();

    double num = 0.0;
    double den = 0.0;
    const double a = atom.a();
    num += manifold_sum(a, beta, m_ref,
                        [a](double m) { return a * (a + 1.0) - m * m; });
    den += manifold_sum(a, beta, m_ref, [](double) { return 1.0; });
    const double b = atom.b();
    if (b >= 0.0) {
        num += manifold_sum(b, beta, m_ref,
                            [b](double m) { return b * (b + 1.0) - m * m; });
        den += manifold_sum(b, beta, m_ref, [](double) { return 1.0; });
    }
    return num / (2.0 * den);
}

double noise_ratio(const AtomSpec& atom, double p) {
    return variance_per_atom(atom, p) / variance_per_atom(atom, 0.0);
}

NoiseStatistics noise_statistics(const AtomSpec& atom, double p) {
    NoiseStatistics out;
    out.variance_per_atom = variance_per_atom(atom, p);
    out.partition_function = std::abs(p) < 1.0
        ? partition_function(atom, beta_from_polarization(p))
        : std::numeric_limits<double>::infinity();
    out.ratio_to_unpolarized = noise_ratio(atom, p);
    return out;
}

} // namespace sq::spin

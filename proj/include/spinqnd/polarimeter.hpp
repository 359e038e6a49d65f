#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "spinqnd/rng.hpp"

namespace sq::pol {

struct PolarimeterConfig {
    double rotation_gain = 1e-5; // rad per unit of collective F_x
    double sample_rate = 0.0;    // Hz; the grid the signal lives on
    double psn_floor = 0.0;      // one-sided shot-noise PSD at duty = 1, rad^2/Hz
};

/// Balanced-polarimeter rotation record for one trajectory:
///
///   phi_i = gate_i * [rotation_gain * F_x(t_i) + psn_i]
///
/// Photon shot noise is white over the on-samples with one-sided density
/// psn_floor/duty (the per-window photon budget at fixed average flux is
/// duty-independent, so the band-averaged floor stays at psn_floor for every
/// duty cycle). Off-windows carry no light and read exactly zero.
/// Throws std::invalid_argument when fx and gate sizes differ.
std::vector<double> synthesize_signal(std::span<const double> fx,
                                      std::span<const std::uint8_t> gate,
                                      double duty, const PolarimeterConfig& cfg,
                                      RandomStream& rng);

struct PSDEstimate {
    std::vector<double> freqs;  // Hz
    std::vector<double> power;  // one-sided, signal^2/Hz
    std::size_t n_avg = 0;      // periodograms averaged in
    double resolution = 0.0;    // Hz per bin
};

enum class Window { hann, rectangular };

/// Averaged one-sided Welch periodogram, 50% segment overlap, per-segment
/// mean removal. Normalized so the integral of `power` over frequency equals
/// the time-domain variance (white-noise Parseval self-test in the suite).
PSDEstimate welch_psd(std::span<const double> signal, std::size_t segment_len,
                      Window window, double sample_rate);

/// Accumulates PSDs of independent records into one average. Records must
/// share the frequency grid; reduction is by arrival order, so feed it in
/// trajectory-index order for deterministic output.
class PsdAccumulator {
public:
    void add(const PSDEstimate& psd);
    bool empty() const { return total_avg_ == 0; }
    PSDEstimate average() const;

private:
    PSDEstimate sum_;
    std::size_t total_avg_ = 0;
};

/// Median of the PSD bins outside `exclusion_band` — a robust estimate of the
/// flat photon-shot-noise background. Throws when the band leaves no bins.
double estimate_psn_floor(const PSDEstimate& psd,
                          std::pair<double, double> exclusion_band);

struct NoiseArea {
    double atomic_variance = 0.0; // clamped at zero for the final report
    double raw_variance = 0.0;    // unclamped trapezoid value
    double psn_level = 0.0;
    std::pair<double, double> band{0.0, 0.0};
};

/// Trapezoidal integral of (power - floor) over `band`. The raw value may be
/// negative for a noisy record; only the reported variance is clamped.
NoiseArea atomic_noise_area(const PSDEstimate& psd, double floor,
                            std::pair<double, double> band);

struct LorentzianFit {
    double amplitude = 0.0; // peak height above the floor
    double center = 0.0;    // Hz
    double hwhm = 0.0;      // Hz
    double floor = 0.0;
    double rms_residual_rel = 0.0; // RMS misfit / peak amplitude
};

/// Least-squares single-Lorentzian fit inside `band`. Diagnostic only; the
/// noise area never uses it.
LorentzianFit fit_lorentzian(const PSDEstimate& psd, std::pair<double, double> band);

} // namespace sq::pol

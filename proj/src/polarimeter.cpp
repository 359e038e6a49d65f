#include "spinqnd/polarimeter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <fftw3.h>

#include "spinqnd/errors.hpp"
#include "spinqnd/nelder_mead.hpp"

namespace sq::pol {

namespace {

// FFTW plan creation is not thread-safe; executing a plan on caller-owned
// buffers is. Plans are cached per segment length behind a mutex and reused
// with fftw_execute_dft_r2c.
class FftPlanCache {
public:
    static FftPlanCache& instance() {
        static FftPlanCache cache;
        return cache;
    }

    fftw_plan get(std::size_t n) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;
        std::vector<double> in(n);
        std::vector<std::complex<double>> out(n / 2 + 1);
        fftw_plan plan = fftw_plan_dft_r2c_1d(
            static_cast<int>(n), in.data(),
            reinterpret_cast<fftw_complex*>(out.data()),
            FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(n, plan);
        return plan;
    }

private:
    FftPlanCache() = default;
    std::mutex mutex_;
    std::unordered_map<std::size_t, fftw_plan> plans_;
};

} // namespace

std::vector<double> synthesize_signal(std::span<const double> fx,
                                      std::span<const std::uint8_t> gate,
                                      double duty, const PolarimeterConfig& cfg,
                                      RandomStream& rng) {
    if (fx.size() != gate.size())
        throw std::invalid_argument(
            "polarimeter: trajectory and gate must share the sample grid");
    if (!(duty > 0.0 && duty <= 1.0))
        throw std::invalid_argument("polarimeter: duty must be in (0, 1]");
    if (cfg.psn_floor < 0.0)
        throw std::invalid_argument("polarimeter: psn_floor must be >= 0");

    // Per-sample shot-noise variance from the one-sided on-window density
    // psn_floor/duty spread over the Nyquist band.
    const double var = cfg.psn_floor / duty * cfg.sample_rate / 2.0;
    const double sigma = std::sqrt(var);

    std::vector<double> phi(fx.size());
    for (std::size_t i = 0; i < fx.size(); ++i) {
        if (!gate[i]) continue;
        double sample = cfg.rotation_gain * fx[i];
        if (sigma > 0.0) sample += sigma * rng.next_gaussian();
        phi[i] = sample;
    }
    return phi;
}

PSDEstimate welch_psd(std::span<const double> signal, std::size_t segment_len,
                      Window window, double sample_rate) {
    if (segment_len < 2)
        throw std::invalid_argument("welch: segment length must be >= 2");
    if (segment_len > signal.size())
        throw std::invalid_argument("welch: segment longer than record");
    if (!(sample_rate > 0.0))
        throw std::invalid_argument("welch: sample rate must be > 0");

    const std::size_t n = segment_len;
    const std::size_t hop = std::max<std::size_t>(1, n / 2);
    const std::size_t n_seg = 1 + (signal.size() - n) / hop;
    const std::size_t n_bins = n / 2 + 1;

    std::vector<double> win(n, 1.0);
    if (window == Window::hann) {
        for (std::size_t i = 0; i < n; ++i)
            win[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                           static_cast<double>(n)));
    }
    const double win_power =
        std::inner_product(win.begin(), win.end(), win.begin(), 0.0);

    fftw_plan plan = FftPlanCache::instance().get(n);
    std::vector<double> seg(n);
    std::vector<std::complex<double>> spec(n_bins);
    std::vector<double> acc(n_bins, 0.0);

    for (std::size_t s = 0; s < n_seg; ++s) {
        const double* src = signal.data() + s * hop;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += src[i];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) seg[i] = (src[i] - mean) * win[i];
        fftw_execute_dft_r2c(plan, seg.data(),
                             reinterpret_cast<fftw_complex*>(spec.data()));
        for (std::size_t k = 0; k < n_bins; ++k) acc[k] += std::norm(spec[k]);
    }

    PSDEstimate out;
    out.freqs.resize(n_bins);
    out.power.resize(n_bins);
    out.resolution = sample_rate / static_cast<double>(n);
    out.n_avg = n_seg;
    const double scale =
        1.0 / (sample_rate * win_power * static_cast<double>(n_seg));
    for (std::size_t k = 0; k < n_bins; ++k) {
        out.freqs[k] = out.resolution * static_cast<double>(k);
        const bool edge = (k == 0) || (n % 2 == 0 && k == n_bins - 1);
        out.power[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
    }
    return out;
}

void PsdAccumulator::add(const PSDEstimate& psd) {
    if (total_avg_ == 0) {
        sum_ = psd;
        for (auto& p : sum_.power) p *= static_cast<double>(psd.n_avg);
        total_avg_ = psd.n_avg;
        return;
    }
    if (psd.freqs.size() != sum_.freqs.size() ||
        std::abs(psd.resolution - sum_.resolution) > 1e-9 * sum_.resolution)
        throw std::invalid_argument("psd accumulator: mismatched frequency grids");
    for (std::size_t k = 0; k < sum_.power.size(); ++k)
        sum_.power[k] += psd.power[k] * static_cast<double>(psd.n_avg);
    total_avg_ += psd.n_avg;
}

PSDEstimate PsdAccumulator::average() const {
    if (total_avg_ == 0)
        throw std::logic_error("psd accumulator: no records added");
    PSDEstimate out = sum_;
    for (auto& p : out.power) p /= static_cast<double>(total_avg_);
    out.n_avg = total_avg_;
    return out;
}

double estimate_psn_floor(const PSDEstimate& psd,
                          std::pair<double, double> exclusion_band) {
    std::vector<double> bins;
    bins.reserve(psd.freqs.size());
    for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
        if (psd.freqs[k] >= exclusion_band.first &&
            psd.freqs[k] <= exclusion_band.second)
            continue;
        bins.push_back(psd.power[k]);
    }
    if (bins.empty())
        throw std::invalid_argument(
            "psn floor: exclusion band covers the whole PSD range");
    const std::size_t mid = bins.size() / 2;
    std::nth_element(bins.begin(), bins.begin() + mid, bins.end());
    double median = bins[mid];
    if (bins.size() % 2 == 0) {
        const double lower = *std::max_element(bins.begin(), bins.begin() + mid);
        median = 0.5 * (median + lower);
    }
    return median;
}

NoiseArea atomic_noise_area(const PSDEstimate& psd, double floor,
                            std::pair<double, double> band) {
    if (band.first >= band.second)
        throw std::invalid_argument("noise area: band must have positive width");
    if (band.first < psd.freqs.front() || band.second > psd.freqs.back())
        throw std::invalid_argument("noise area: band outside the PSD range");

    double integral = 0.0;
    bool any = false;
    for (std::size_t k = 0; k + 1 < psd.freqs.size(); ++k) {
        if (psd.freqs[k] < band.first || psd.freqs[k + 1] > band.second) continue;
        const double a = psd.power[k] - floor;
        const double b = psd.power[k + 1] - floor;
        integral += 0.5 * (a + b) * (psd.freqs[k + 1] - psd.freqs[k]);
        any = true;
    }
    if (!any)
        throw std::invalid_argument("noise area: band narrower than one PSD bin");

    NoiseArea out;
    out.raw_variance = integral;
    out.atomic_variance = std::max(integral, 0.0);
    out.psn_level = floor;
    out.band = band;
    return out;
}

LorentzianFit fit_lorentzian(const PSDEstimate& psd, std::pair<double, double> band) {
    std::vector<double> f, p;
    for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
        if (psd.freqs[k] < band.first || psd.freqs[k] > band.second) continue;
        f.push_back(psd.freqs[k]);
        p.push_back(psd.power[k]);
    }
    if (f.size() < 5)
        throw std::invalid_argument("lorentzian fit: band contains too few bins");

    const std::size_t peak =
        std::distance(p.begin(), std::max_element(p.begin(), p.end()));
    const double floor0 = *std::min_element(p.begin(), p.end());
    const double amp0 = std::max(p[peak] - floor0, 1e-300);
    double hwhm0 = psd.resolution;
    for (std::size_t k = peak; k < p.size(); ++k) {
        if (p[k] - floor0 < amp0 / 2.0) {
            hwhm0 = std::max(f[k] - f[peak], psd.resolution);
            break;
        }
    }

    auto model = [&](double amp, double c, double w, double fl, double x) {
        const double u = (x - c) / w;
        return fl + amp / (1.0 + u * u);
    };
    auto sse = [&](const std::vector<double>& q) {
        const double amp = std::exp(q[0]);
        const double c = q[1];
        const double w = std::exp(q[2]);
        const double fl = q[3];
        double acc = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double r = p[k] - model(amp, c, w, fl, f[k]);
            acc += r * r;
        }
        return acc;
    };

    opt::SimplexOptions sopts;
    sopts.max_evaluations = 8000;
    auto res = opt::nelder_mead(
        sse, {std::log(amp0), f[peak], std::log(hwhm0), floor0}, sopts);

    LorentzianFit fit;
    fit.amplitude = std::exp(res.x[0]);
    fit.center = res.x[1];
    fit.hwhm = std::exp(res.x[2]);
    fit.floor = res.x[3];
    fit.rms_residual_rel =
        std::sqrt(res.value / static_cast<double>(f.size())) / fit.amplitude;
    return fit;
}

} // namespace sq::pol

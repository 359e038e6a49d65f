#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace sq::opt {

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

struct SimplexOptions {
    int max_evaluations = 4000;
    double x_tol = 1e-11;
    double f_tol = 1e-13;
    double initial_step = 0.25;
};

/// Nelder-Mead downhill simplex. Deterministic: the trajectory depends only
/// on the start point and options. Standard reflection/expansion/contraction
/// coefficients (1, 2, 0.5, 0.5).
inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> start,
                                 const SimplexOptions& opts = {}) {
    const std::size_t n = start.size();
    std::vector<std::vector<double>> xs(n + 1, start);
    for (std::size_t i = 0; i < n; ++i)
        xs[i + 1][i] += opts.initial_step;

    std::vector<double> fx(n + 1);
    int evals = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        fx[i] = f(xs[i]);
        ++evals;
    }

    std::vector<std::size_t> order(n + 1);
    auto sort_simplex = [&] {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    };

    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    bool converged = false;
    while (evals < opts.max_evaluations) {
        sort_simplex();
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];

        double spread = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t v = 1; v <= n; ++v)
                spread = std::max(spread, std::abs(xs[order[v]][i] - xs[best][i]));
        }
        if (spread < opts.x_tol && std::abs(fx[worst] - fx[best]) < opts.f_tol) {
            converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t v = 0; v <= n; ++v) {
            if (v == worst) continue;
            for (std::size_t i = 0; i < n; ++i) centroid[i] += xs[v][i];
        }
        for (std::size_t i = 0; i < n; ++i) centroid[i] /= static_cast<double>(n);

        for (std::size_t i = 0; i < n; ++i)
            xr[i] = centroid[i] + (centroid[i] - xs[worst][i]);
        const double fr = f(xr);
        ++evals;

        if (fr < fx[best]) {
            for (std::size_t i = 0; i < n; ++i)
                xe[i] = centroid[i] + 2.0 * (xr[i] - centroid[i]);
            const double fe = f(xe);
            ++evals;
            if (fe < fr) {
                xs[worst] = xe;
                fx[worst] = fe;
            } else {
                xs[worst] = xr;
                fx[worst] = fr;
            }
        } else if (fr < fx[second]) {
            xs[worst] = xr;
            fx[worst] = fr;
        } else {
            const bool outside = fr < fx[worst];
            const std::vector<double>& toward = outside ? xr : xs[worst];
            for (std::size_t i = 0; i < n; ++i)
                xc[i] = centroid[i] + 0.5 * (toward[i] - centroid[i]);
            const double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, fx[worst])) {
                xs[worst] = xc;
                fx[worst] = fc;
            } else {
                // shrink toward the best vertex
                for (std::size_t v = 0; v <= n; ++v) {
                    if (v == best) continue;
                    for (std::size_t i = 0; i < n; ++i)
                        xs[v][i] = xs[best][i] + 0.5 * (xs[v][i] - xs[best][i]);
                    fx[v] = f(xs[v]);
                    ++evals;
                }
            }
        }
    }

    sort_simplex();
    return {xs[order[0]], fx[order[0]], evals, converged};
}

} // namespace sq::opt

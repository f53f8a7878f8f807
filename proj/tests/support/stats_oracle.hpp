#pragma once

// Test-side statistical oracles. Deliberately independent of the library
// under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace testsupport {

// Regularized upper incomplete gamma Q(a, x) via series / continued
// fraction (Numerical Recipes style).
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q domain");
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // P(a,x) by series, return 1 - P.
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Q(a,x) by continued fraction.
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

// Pearson chi-square independence test over pairs (row, col).
// Returns the p-value.
inline double chi_square_independence_pvalue(
    const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs) {
    std::map<std::int32_t, double> row_totals, col_totals;
    std::map<std::pair<std::int32_t, std::int32_t>, double> cells;
    for (const auto& [r, c] : pairs) {
        row_totals[r] += 1.0;
        col_totals[c] += 1.0;
        cells[{r, c}] += 1.0;
    }
    const double n = static_cast<double>(pairs.size());
    double chi2 = 0.0;
    for (const auto& [r, rt] : row_totals) {
        for (const auto& [c, ct] : col_totals) {
            const double expected = rt * ct / n;
            const auto it = cells.find({r, c});
            const double observed = it == cells.end() ? 0.0 : it->second;
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
    }
    const double dof = (static_cast<double>(row_totals.size()) - 1.0) *
                       (static_cast<double>(col_totals.size()) - 1.0);
    if (dof <= 0.0) return 1.0;
    return gamma_q(dof / 2.0, chi2 / 2.0);
}

// Kolmogorov-Smirnov statistic of a sample against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> sample, Cdf cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

inline double lognormal_cdf(double x, double mu, double sigma) {
    if (x <= 0.0) return 0.0;
    return 0.5 * std::erfc(-(std::log(x) - mu) / (sigma * std::sqrt(2.0)));
}

}  // namespace testsupport

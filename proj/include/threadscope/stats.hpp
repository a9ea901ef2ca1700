#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace threadscope {

/// Sample Pearson correlation. Throws on length mismatch, n < 2 or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// 1-based ranks with ties assigned their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson over average ranks. Throws when either side is entirely tied.
double spearman(std::span<const double> x, std::span<const double> y);

/// Cohen's kappa over paired category labels. Throws when p_e = 1.
double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

/// Fraction of positions where the labels agree.
double exact_match(std::span<const std::string> a, std::span<const std::string> b);

/// Nearest-rank quantile of an ascending list: element ceil(q * n), 1-based,
/// clamped to [1, n].
double quantile_nearest_rank_sorted(std::span<const double> sorted, double q);

struct DistributionSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double p5 = 0.0;
    double p95 = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::vector<double> bin_edges;
    /// counts[i] covers [edges[i], edges[i+1]); values outside every bin are not counted.
    std::vector<std::size_t> counts;
};

/// Throws Error(EmptyInput) on an empty list; bin_edges must be ascending.
DistributionSummary summarize(std::span<const double> values, std::span<const double> bin_edges = {});

/// n+1 evenly spaced edges over [lo, hi]. The last bin is widened by one ulp so
/// that `hi` itself is counted.
std::vector<double> uniform_edges(double lo, double hi, std::size_t bins);

double mean(std::span<const double> values);

}  // namespace threadscope

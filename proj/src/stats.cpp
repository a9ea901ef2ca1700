#include "threadscope/stats.hpp"

#include "threadscope/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace threadscope {

namespace {

void check_pair(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw Error(ErrorKind::InvalidArgument, fmt::format("{}: length mismatch ({} vs {})", what, a, b));
    if (a < 2) throw Error(ErrorKind::InvalidArgument, fmt::format("{}: need at least 2 pairs, got {}", what, a));
}

}  // namespace

double mean(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "mean of an empty list");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x.size(), y.size(), "pearson");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::Degenerate, "pearson: zero variance");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    check_pair(x.size(), y.size(), "spearman");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    try {
        return pearson(rx, ry);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Degenerate) throw Error(ErrorKind::Degenerate, "spearman: all values tied");
        throw;
    }
}

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
    check_pair(a.size(), b.size(), "cohen_kappa");
    std::map<std::string_view, double> margin_a, margin_b;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        margin_a[a[i]] += 1.0;
        margin_b[b[i]] += 1.0;
        if (a[i] == b[i]) agree += 1.0;
    }
    const double n = static_cast<double>(a.size());
    const double p_o = agree / n;
    double p_e = 0.0;
    for (const auto& [cat, count] : margin_a) {
        const auto it = margin_b.find(cat);
        if (it != margin_b.end()) p_e += (count / n) * (it->second / n);
    }
    if (p_e >= 1.0) throw Error(ErrorKind::Degenerate, "cohen_kappa: chance agreement is 1 (single-category marginals)");
    return (p_o - p_e) / (1.0 - p_e);
}

double exact_match(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::InvalidArgument, "exact_match: length mismatch");
    if (a.empty()) throw Error(ErrorKind::EmptyInput, "exact_match of empty lists");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
    return static_cast<double>(same) / static_cast<double>(a.size());
}

double quantile_nearest_rank_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw Error(ErrorKind::EmptyInput, "quantile of an empty list");
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(q * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

DistributionSummary summarize(std::span<const double> values, std::span<const double> bin_edges) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "summarize of an empty list");
    if (!std::is_sorted(bin_edges.begin(), bin_edges.end())) {
        throw Error(ErrorKind::InvalidArgument, "summarize: bin edges must be ascending");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    DistributionSummary s;
    s.n = sorted.size();
    s.mean = mean(sorted);
    s.median = quantile_nearest_rank_sorted(sorted, 0.5);
    s.p5 = quantile_nearest_rank_sorted(sorted, 0.05);
    s.p95 = quantile_nearest_rank_sorted(sorted, 0.95);
    s.min = sorted.front();
    s.max = sorted.back();
    s.bin_edges.assign(bin_edges.begin(), bin_edges.end());
    if (bin_edges.size() >= 2) {
        s.counts.assign(bin_edges.size() - 1, 0);
        for (double v : sorted) {
            const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
            if (it == bin_edges.begin() || it == bin_edges.end()) continue;
            ++s.counts[static_cast<std::size_t>(it - bin_edges.begin()) - 1];
        }
    }
    return s;
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
    if (bins == 0 || !(hi > lo)) throw Error(ErrorKind::InvalidArgument, "uniform_edges: need bins > 0 and hi > lo");
    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    edges.back() = std::nextafter(hi, std::numeric_limits<double>::infinity());
    return edges;
}

}  // namespace threadscope

#include "threadscope/entropy.hpp"

#include "threadscope/corpus.hpp"
#include "threadscope/error.hpp"
#include "threadscope/util.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace threadscope {

std::string_view to_string(DiversityBand band) {
    switch (band) {
        case DiversityBand::High: return "HIGH";
        case DiversityBand::Moderate: return "MODERATE";
        case DiversityBand::Low: return "LOW";
        case DiversityBand::Absent: return "ABSENT";
    }
    return "ABSENT";
}

DiversityBand band_for(std::optional<double> self_ncd) {
    if (!self_ncd) return DiversityBand::Absent;
    if (*self_ncd >= 0.8) return DiversityBand::High;
    if (*self_ncd >= 0.5) return DiversityBand::Moderate;
    return DiversityBand::Low;
}

namespace {

struct VocabCounts {
    std::size_t total = 0;
    std::vector<std::size_t> counts;  // ascending
};

VocabCounts pooled_counts(std::span<const TokenSequence> comments) {
    std::unordered_map<std::string_view, std::size_t> freq;
    VocabCounts out;
    for (const auto& seq : comments) {
        for (const auto& tok : seq) {
            ++freq[tok];
            ++out.total;
        }
    }
    out.counts.reserve(freq.size());
    for (const auto& [_, n] : freq) out.counts.push_back(n);
    std::sort(out.counts.begin(), out.counts.end());
    return out;
}

double entropy_from_counts(const VocabCounts& vc) {
    const double total = static_cast<double>(vc.total);
    double h = 0.0;
    for (std::size_t n : vc.counts) {
        const double p = static_cast<double>(n) / total;
        h -= p * std::log2(p);
    }
    return std::max(0.0, h);
}

// Unordered pair number `rank` in the lexicographic listing of (i, j), i < j < n.
std::pair<std::size_t, std::size_t> unrank_pair(std::uint64_t rank, std::uint64_t n) {
    // Row i holds n-1-i pairs; rows before i hold i*n - i(i+1)/2.
    auto before = [n](std::uint64_t i) { return i * n - i * (i + 1) / 2; };
    const double nn = static_cast<double>(n);
    auto i = static_cast<std::uint64_t>(
        std::floor(((2.0 * nn - 1.0) - std::sqrt((2.0 * nn - 1.0) * (2.0 * nn - 1.0) - 8.0 * static_cast<double>(rank))) / 2.0));
    while (i > 0 && before(i) > rank) --i;
    while (before(i + 1) <= rank) ++i;
    const std::uint64_t j = i + 1 + (rank - before(i));
    return {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
}

}  // namespace

double token_entropy(std::span<const TokenSequence> comments) {
    const auto vc = pooled_counts(comments);
    if (vc.total == 0) throw Error(ErrorKind::EmptyInput, "token_entropy: no tokens after pooling");
    return entropy_from_counts(vc);
}

namespace {

double ncd_with_lengths(std::string_view x, std::string_view y, std::size_t cx, std::size_t cy) {
    const std::string joined = x <= y ? concat(x, y) : concat(y, x);
    const double cxy = static_cast<double>(compressed_len(joined));
    const double lo = static_cast<double>(std::min(cx, cy));
    const double hi = static_cast<double>(std::max(cx, cy));
    return (cxy - lo) / hi;
}

}  // namespace

double ncd(std::string_view x, std::string_view y) {
    if (x.empty() || y.empty()) throw Error(ErrorKind::EmptyInput, "ncd: inputs must be non-empty");
    return ncd_with_lengths(x, y, compressed_len(x), compressed_len(y));
}

std::optional<double> self_ncd(std::span<const std::string> comments, std::size_t pair_budget, std::uint64_t seed) {
    std::vector<std::string_view> texts;
    texts.reserve(comments.size());
    for (const auto& c : comments) {
        if (!c.empty()) texts.emplace_back(c);
    }
    if (texts.size() < 2 || pair_budget == 0) return std::nullopt;
    const std::uint64_t n = texts.size();
    const std::uint64_t total_pairs = n * (n - 1) / 2;
    Rng rng(seed);
    const auto picks = sample_indices(total_pairs, pair_budget, rng);

    std::vector<std::size_t> clen(texts.size(), 0);
    auto len_of = [&](std::size_t i) {
        if (clen[i] == 0) clen[i] = compressed_len(texts[i]);
        return clen[i];
    };
    double sum = 0.0;
    for (std::uint64_t rank : picks) {
        const auto [i, j] = unrank_pair(rank, n);
        sum += ncd_with_lengths(texts[i], texts[j], len_of(i), len_of(j));
    }
    return sum / static_cast<double>(picks.size());
}

std::vector<AgentEntropyRecord> agent_entropy_table(const Corpus& corpus, const EntropyOptions& options) {
    std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> qualifying;
    for (const auto& entry : corpus.comments_by_agent()) {
        if (entry.second.size() >= options.min_comments) qualifying.push_back(&entry);
    }
    if (options.sample > 0 && qualifying.size() > options.sample) {
        Rng rng(derive_seed(options.seed, "entropy-agent-sample"));
        const auto keep = sample_indices(qualifying.size(), options.sample, rng);
        std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> kept;
        kept.reserve(keep.size());
        for (auto k : keep) kept.push_back(qualifying[k]);
        qualifying = std::move(kept);
    }

    std::vector<AgentEntropyRecord> out(qualifying.size());
    parallel_for(qualifying.size(), options.jobs, [&](std::size_t a) {
        const auto& [agent_id, comment_idx] = *qualifying[a];
        std::vector<std::string> texts;
        std::vector<TokenSequence> tokens;
        texts.reserve(comment_idx.size());
        tokens.reserve(comment_idx.size());
        for (std::size_t ci : comment_idx) {
            const auto& text = corpus.comments()[ci].content;
            texts.push_back(text);
            tokens.push_back(tokenize(text));
        }
        AgentEntropyRecord rec;
        rec.agent_id = agent_id;
        rec.n_comments = comment_idx.size();
        const auto vc = pooled_counts(tokens);
        rec.vocab_size = vc.counts.size();
        rec.token_entropy_bits = vc.total == 0 ? 0.0 : entropy_from_counts(vc);
        rec.self_ncd = self_ncd(texts, options.pair_budget, derive_seed(options.seed, agent_id));
        rec.band = band_for(rec.self_ncd);
        out[a] = std::move(rec);
    });
    return out;
}

TsvTable entropy_table_tsv(std::span<const AgentEntropyRecord> records) {
    TsvTable t({"agent_id", "n_comments", "token_entropy_bits", "vocab_size", "self_ncd", "band"});
    for (const auto& r : records) {
        t.add_row({tsv_escape(r.agent_id), std::to_string(r.n_comments), format_double(r.token_entropy_bits),
                   std::to_string(r.vocab_size), r.self_ncd ? format_double(*r.self_ncd) : std::string("NA"),
                   std::string(to_string(r.band))});
    }
    return t;
}

}  // namespace threadscope

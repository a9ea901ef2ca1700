#pragma once
// Per-agent behavioral diversity: pooled token entropy and self-NCD.

#include "threadscope/textproc.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace threadscope {

class Corpus;
class TsvTable;

enum class DiversityBand { High, Moderate, Low, Absent };

std::string_view to_string(DiversityBand band);

/// HIGH for self-NCD >= 0.8, MODERATE for [0.5, 0.8), LOW below 0.5.
DiversityBand band_for(std::optional<double> self_ncd);

struct AgentEntropyRecord {
    std::string agent_id;
    std::size_t n_comments = 0;
    double token_entropy_bits = 0.0;
    std::size_t vocab_size = 0;
    std::optional<double> self_ncd;  // absent when fewer than two usable comments
    DiversityBand band = DiversityBand::Absent;
};

/// Shannon entropy (bits) of the pooled token distribution. Order-free: counts
/// are summed in ascending order. Throws Error(EmptyInput) with no tokens.
double token_entropy(std::span<const TokenSequence> comments);

/// (C(a⊕b) − min(C(a), C(b))) / max(C(a), C(b)) with the pair compressed in
/// lexicographic order, so ncd(x, y) == ncd(y, x) exactly. Throws on empty input.
double ncd(std::string_view x, std::string_view y);

inline constexpr std::size_t kDefaultPairBudget = 30;

/// Mean NCD over min(K, n(n-1)/2) distinct unordered pairs drawn with `seed`.
/// Empty texts are ignored; nullopt when fewer than two remain.
std::optional<double> self_ncd(std::span<const std::string> comments, std::size_t pair_budget, std::uint64_t seed);

struct EntropyOptions {
    std::size_t min_comments = 10;
    std::size_t pair_budget = kDefaultPairBudget;
    std::uint64_t seed = 0;
    /// Optional cap on analysed agents (uniform seeded subsample), 0 = all.
    std::size_t sample = 0;
    std::size_t jobs = 1;
};

/// One record per agent with at least `min_comments` comments, ordered by
/// agent id. Each agent's pairs are drawn from derive_seed(seed, agent_id).
std::vector<AgentEntropyRecord> agent_entropy_table(const Corpus& corpus, const EntropyOptions& options);

TsvTable entropy_table_tsv(std::span<const AgentEntropyRecord> records);

}  // namespace threadscope

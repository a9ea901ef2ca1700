#pragma once
// Marginal information contributed by the k-th comment of a post, and the
// position-wise saturation curve averaged over posts.

#include "threadscope/textproc.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace threadscope {

class Corpus;
class TsvTable;

/// |ngrams(comment) \ accumulated| / |ngrams(comment)|; nullopt (skip) when
/// the comment has no n-grams of the set's order.
std::optional<double> lexical_ig(const TokenSequence& comment, const NgramSet& accumulated);

/// (C(accumulated ⊕ comment) − C(accumulated)) / C(comment); nullopt for an
/// empty comment. An empty accumulated text contributes C(∅).
std::optional<double> compression_ig(std::string_view accumulated_text, std::string_view comment);

struct PositionGain {
    std::size_t position = 0;
    std::optional<double> unigram_gain;
    std::optional<double> bigram_gain;
    std::optional<double> compression_gain;
    std::size_t cumulative_vocab = 0;
};

struct PostSaturation {
    std::string post_id;
    std::vector<PositionGain> positions;
};

inline constexpr std::size_t kDefaultMaxPosition = 30;

/// Walks positions 0..min(n, max_position)-1 of `comments` (already in corpus
/// order). Position 0 reports 1.0 for every measure that is not skipped.
/// Accumulated bigrams are the union of per-comment bigram sets, so no bigram
/// spans a comment boundary. Throws Error(EmptyInput) for an empty list.
PostSaturation post_saturation(std::span<const std::string> comments, std::size_t max_position = kDefaultMaxPosition);

struct CurvePoint {
    std::size_t position = 0;
    double unigram_gain = 0.0;
    double bigram_gain = 0.0;
    double compression_gain = 0.0;
    double cumulative_vocab = 0.0;
    std::size_t n_posts = 0;          // posts with a comment at this position
    std::size_t n_unigram = 0;        // contributors to each mean (skips excluded)
    std::size_t n_bigram = 0;
    std::size_t n_compression = 0;
};

struct SaturationCurve {
    std::size_t max_position = 0;
    std::size_t n_qualifying_posts = 0;
    std::size_t n_sampled_posts = 0;
    std::vector<CurvePoint> points;
};

struct SaturationOptions {
    std::size_t min_comments = 5;
    std::size_t sample_size = 20000;
    std::size_t max_position = kDefaultMaxPosition;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

/// Averages per-position gains over a seeded uniform sample of posts with at
/// least `min_comments` comments. Position 0 is 1.0 by convention. Throws
/// Error(EmptyInput) when no post qualifies.
SaturationCurve aggregate_curves(const Corpus& corpus, const SaturationOptions& options);

/// Averages already-computed posts (in the given order).
SaturationCurve aggregate_post_saturations(std::span<const PostSaturation> posts, std::size_t max_position);

TsvTable saturation_tsv(const SaturationCurve& curve);

}  // namespace threadscope

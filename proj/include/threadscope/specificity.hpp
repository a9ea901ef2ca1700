#pragma once
// Post-comment relevance: content-word Jaccard, baseline-subtracted lexical
// and semantic specificity, stratification and the reply-depth comparison.

#include "threadscope/providers.hpp"
#include "threadscope/textproc.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace threadscope {

class Corpus;
class KeyValueDoc;
class TsvTable;

/// |A∩B| / |A∪B|; 0 when both sets are empty.
double jaccard(const ContentWordSet& a, const ContentWordSet& b);

/// dot(u,v) / (|u||v|), clamped to [-1, 1]. Throws Error(DimensionMismatch)
/// for unequal sizes and Error(Degenerate) for a zero vector.
double cosine(std::span<const float> u, std::span<const float> v);

struct LexicalSpecificity {
    double jaccard_actual = 0.0;
    double baseline_jaccard_mean = 0.0;
    double spec = 0.0;  // jaccard_actual - baseline_jaccard_mean, computed once
};

/// J(c, p) minus the mean J(c, p_r) over the baselines (mean 0 for none).
LexicalSpecificity lexical_specificity(const ContentWordSet& comment, const ContentWordSet& post,
                                       std::span<const ContentWordSet> baselines);

struct SemanticSpecificity {
    double cos_actual = 0.0;
    double baseline_cos_mean = 0.0;
    double spec = 0.0;
};

/// cos(e_c, e_p) minus the mean cos(e_c, e_{p_r}); errors as cosine.
SemanticSpecificity semantic_specificity(const EmbeddingVector& comment, const EmbeddingVector& post,
                                         std::span<const EmbeddingVector> baselines);

enum class Stratum { High, ZeroOverlap, Negative, Other };

std::string_view to_string(Stratum s);
std::optional<Stratum> parse_stratum(std::string_view s);

inline constexpr double kStratumEpsilon = 1e-9;

/// ZERO_OVERLAP when J = 0, else NEGATIVE below -epsilon, HIGH above +epsilon,
/// OTHER in between.
Stratum stratify(double jaccard_actual, double lexical_spec, double epsilon = kStratumEpsilon);

/// R distinct post indexes in [0, n_posts) excluding `exclude`, ascending;
/// fewer when the corpus is smaller.
std::vector<std::size_t> sample_baseline_posts(std::size_t n_posts, std::size_t exclude, std::size_t r,
                                               std::uint64_t seed);

struct SpecificityRecord {
    std::string comment_id;
    std::string post_id;
    std::optional<std::uint32_t> depth;
    std::size_t comment_content_len = 0;  // content-word tokens
    double jaccard_actual = 0.0;
    double baseline_jaccard_mean = 0.0;
    double lexical_spec = 0.0;
    std::optional<double> cos_actual;
    std::optional<double> baseline_cos_mean;
    std::optional<double> semantic_spec;
    Stratum stratum = Stratum::Other;
    bool embed_truncated = false;
    std::vector<std::string> baseline_post_ids;  // shared by both measures
};

struct LengthBucket {
    std::size_t index = 0;
    std::size_t n = 0;
    std::size_t min_len = 0;
    std::size_t max_len = 0;
    double median_jaccard = 0.0;
    double median_spec = 0.0;
    double mean_spec = 0.0;
};

struct SpecificityOptions {
    std::size_t sample_size = 50000;
    std::size_t baseline_r = 10;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    double epsilon = kStratumEpsilon;
    double semantic_threshold = 0.05;  // "meaningful" semantic specificity
    std::size_t n_length_buckets = 10;
    EmbeddingClient* embeddings = nullptr;  // semantic fields stay absent when null
};

struct SpecificityReport {
    std::vector<SpecificityRecord> records;  // ordered by comment id
    std::vector<LengthBucket> length_buckets;
    std::size_t n_candidate_pairs = 0;
    std::size_t baseline_r = 0;
    double semantic_threshold = 0.0;
    bool with_embeddings = false;
};

/// Seeded uniform sample of (post, comment) pairs over resolved comments
/// whose post exists; all pairs when the sample exceeds them. Each record's
/// baselines come from derive_seed(seed, comment_id). Embedding failures leave
/// that record's semantic fields absent.
SpecificityReport specificity_report(const Corpus& corpus, const SpecificityOptions& options);

/// Records sorted by (comment_content_len, comment_id), cut into `n` buckets
/// of near-equal size.
std::vector<LengthBucket> length_buckets(std::span<const SpecificityRecord> records, std::size_t n);

TsvTable specificity_tsv(std::span<const SpecificityRecord> records);
std::vector<SpecificityRecord> parse_specificity_tsv(const TsvTable& table);
TsvTable length_bucket_tsv(std::span<const LengthBucket> buckets);
KeyValueDoc specificity_summary(const SpecificityReport& report);

struct ReplyGroupSummary {
    std::size_t n = 0;
    double mean_jaccard = 0.0;
    double zero_overlap_fraction = 0.0;
    double mean_spec = 0.0;
    double median_spec = 0.0;
    double p10_spec = 0.0;
    double p90_spec = 0.0;
};

struct NestedReplyReport {
    ReplyGroupSummary top_level;  // depth 0, compared with the post
    ReplyGroupSummary nested;     // depth >= 1, compared with the parent comment
    std::size_t n_excluded = 0;   // unresolved depth or missing parent
};

/// Depth-0 records keep their post Jaccard and lexical spec. Depth >= 1
/// records use J against the parent comment, and spec = that J minus the
/// record's random-post baseline mean.
NestedReplyReport nested_reply_report(const Corpus& corpus, std::span<const SpecificityRecord> records);
KeyValueDoc nested_reply_document(const NestedReplyReport& report);

}  // namespace threadscope

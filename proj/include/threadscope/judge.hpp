#pragma once
// LLM-as-judge validation: stratified sampling, prompt rendering, tolerant
// verdict parsing, inter-judge agreement and judge-vs-metric correlation.

#include "threadscope/specificity.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace threadscope {

class Corpus;
class JudgeClient;
class KeyValueDoc;
class TsvTable;
struct Comment;
struct Post;

enum class Category { GenericAffirmation, SelfPromotion, Spam, OnTopic, Substantive, OffTopic };

inline constexpr Category kAllCategories[] = {Category::GenericAffirmation, Category::SelfPromotion, Category::Spam,
                                              Category::OnTopic,            Category::Substantive,   Category::OffTopic};

/// Lowercase snake form, e.g. "generic_affirmation".
std::string_view to_string(Category c);
/// Case-insensitive; spaces and hyphens count as underscores.
std::optional<Category> parse_category(std::string_view text);

struct JudgeVerdict {
    std::string comment_id;
    int responsiveness = 1;  // 1..5
    int information = 1;     // 1..5
    Category category = Category::OffTopic;
    std::string judge_model;
};

struct SampleEntry {
    std::string post_id;
    std::string comment_id;
    Stratum stratum = Stratum::Other;
};

struct SampleTargets {
    std::size_t high = 500;
    std::size_t zero_overlap = 1000;
    std::size_t negative = 500;
};

struct JudgeSample {
    std::vector<SampleEntry> entries;  // canonical order: comment id ascending
    SampleTargets targets;
    std::map<Stratum, std::size_t> available;
    std::map<Stratum, std::size_t> shortfall;  // target minus drawn, when positive
};

/// Uniform seeded draw within HIGH, ZERO_OVERLAP and NEGATIVE; a short
/// stratum contributes all members and records the shortfall.
JudgeSample build_sample(std::span<const SpecificityRecord> records, const SampleTargets& targets, std::uint64_t seed);

TsvTable sample_tsv(const JudgeSample& sample);
JudgeSample parse_sample_tsv(const TsvTable& table);

/// Deterministic judge prompt. An empty post body renders the title alone.
std::string render_prompt(const Post& post, const Comment& comment);

enum class VerdictError { None, NoObject, MissingField, ScoreRange, UnknownCategory };

std::string_view to_string(VerdictError e);

struct ParsedVerdict {
    int responsiveness = 0;
    int information = 0;
    Category category = Category::OffTopic;
};

struct VerdictParse {
    std::optional<ParsedVerdict> verdict;
    VerdictError error = VerdictError::None;
    std::string message;
};

/// Reads the first well-formed JSON object in `raw` (prose around it is
/// ignored). Scores must be integers in 1..5.
VerdictParse parse_verdict(std::string_view raw);

struct JudgeFailure {
    std::string comment_id;
    std::string judge_model;
    std::string kind;  // ABSENT, MISSING_RECORD, or a VerdictError name
    std::string raw;
};

struct JudgeRunResult {
    std::vector<JudgeVerdict> verdicts;              // sample order
    std::vector<JudgeFailure> failures;
    std::vector<JudgeVerdict> calibration_verdicts;  // calibration subset order
    std::vector<JudgeFailure> calibration_failures;
};

struct JudgeRunOptions {
    JudgeClient* primary = nullptr;
    JudgeClient* calibration = nullptr;  // optional second judge
    std::size_t calibration_size = 200;
};

/// Judges every sample entry with the primary client; the first
/// `calibration_size` entries also go to the calibration client. Provider and
/// parse failures are collected, never thrown.
JudgeRunResult run_judgement(const Corpus& corpus, const JudgeSample& sample, const JudgeRunOptions& options);

TsvTable verdicts_tsv(std::span<const JudgeVerdict> verdicts);
std::vector<JudgeVerdict> parse_verdicts_tsv(const TsvTable& table);
TsvTable failures_tsv(std::span<const JudgeFailure> failures);

struct AgreementStats {
    std::size_t n_shared = 0;
    std::optional<double> kappa;  // absent when chance agreement is 1
    double exact_match = 0.0;
    std::optional<double> spearman_responsiveness;  // absent when a side is constant
    std::optional<double> spearman_information;
};

/// Joins on comment id. Throws Error(InvalidArgument) with fewer than two
/// shared items.
AgreementStats agreement_stats(std::span<const JudgeVerdict> a, std::span<const JudgeVerdict> b);
KeyValueDoc agreement_document(const AgreementStats& s);

struct StratumJudgeSummary {
    std::size_t n = 0;
    double mean_responsiveness = 0.0;
    double mean_information = 0.0;
    std::map<Category, std::size_t> category_counts;
};

struct MetricCorrelations {
    std::size_t n_joined = 0;
    std::vector<std::string> orphans;  // verdict comment ids with no record
    std::optional<double> rho_resp_jaccard;
    std::optional<double> rho_resp_semantic;
    std::size_t n_semantic = 0;
    double mean_responsiveness = 0.0;
    double mean_information = 0.0;
    std::map<Category, std::size_t> category_counts;
    std::map<Stratum, StratumJudgeSummary> by_stratum;
};

/// Throws Error(EmptyInput) when no verdict joins a record.
MetricCorrelations metric_correlations(std::span<const JudgeVerdict> verdicts,
                                       std::span<const SpecificityRecord> records);
KeyValueDoc correlation_document(const MetricCorrelations& m);
/// Stratum × category counts with row-normalized fractions.
TsvTable category_by_stratum_tsv(const MetricCorrelations& m);

}  // namespace threadscope

#pragma once
// Artifact writers for every analysis, the run manifest, and the end-to-end
// report over an ingested corpus. All outputs are TSV or key=value files.

#include "threadscope/entropy.hpp"
#include "threadscope/judge.hpp"
#include "threadscope/saturation.hpp"
#include "threadscope/specificity.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace threadscope {

class Corpus;
class KeyValueDoc;
struct CorpusStats;
struct MergeReport;

inline constexpr std::string_view kToolVersion = "0.1.0";

struct ManifestInputs {
    std::string command;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> flags;      // written sorted by name
    std::optional<std::string> corpus_hash;
    std::vector<std::pair<std::string, std::string>> providers;  // role -> model id
};

/// Tool version, seed, stoplist and compressor identity, provider models,
/// flags and corpus hash. Holds no timestamps, so identical inputs give
/// identical manifests.
KeyValueDoc run_manifest(const ManifestInputs& inputs);

/// Long-format histogram: series, bin_lo, bin_hi, count.
TsvTable histogram_tsv(std::span<const std::pair<std::string, std::vector<double>>> series,
                       std::span<const double> edges);

KeyValueDoc entropy_summary(std::span<const AgentEntropyRecord> records);
KeyValueDoc saturation_summary(const SaturationCurve& curve);

// Each writer returns the file names it created inside `out`.
std::vector<std::string> write_stats_outputs(const CorpusStats& stats, const MergeReport& report,
                                             const std::filesystem::path& out);
std::vector<std::string> write_entropy_outputs(std::span<const AgentEntropyRecord> records,
                                               const std::filesystem::path& out);
std::vector<std::string> write_saturation_outputs(const SaturationCurve& curve, const std::filesystem::path& out);
std::vector<std::string> write_specificity_outputs(const SpecificityReport& report, const std::filesystem::path& out);
std::vector<std::string> write_nested_outputs(const NestedReplyReport& report, const std::filesystem::path& out);
std::vector<std::string> write_judge_sample_outputs(const JudgeSample& sample, const std::filesystem::path& out);
std::vector<std::string> write_judge_run_outputs(const JudgeRunResult& result, const JudgeRunOptions& options,
                                                 const std::filesystem::path& out);
std::vector<std::string> write_agreement_outputs(const AgreementStats& stats, const std::filesystem::path& out);
std::vector<std::string> write_correlation_outputs(const MetricCorrelations& m, std::span<const JudgeVerdict> verdicts,
                                                   std::span<const SpecificityRecord> records,
                                                   const std::filesystem::path& out);

enum class Analysis { Stats, Entropy, Saturation, Specificity, Nested, Judge };

std::string_view to_string(Analysis a);
std::optional<Analysis> parse_analysis(std::string_view name);

struct ReportOptions {
    std::set<Analysis> analyses;
    EntropyOptions entropy;
    SaturationOptions saturation;
    SpecificityOptions specificity;  // embeddings client enables the semantic fields
    SampleTargets judge_targets;
    JudgeRunOptions judge;           // judge analysis needs judge.primary
    std::uint64_t seed = 0;
};

struct ReportOutcome {
    std::vector<std::string> files;
    std::size_t semantic_absent = 0;
    std::size_t judge_failures = 0;
};

/// Runs the selected analyses in a fixed order and writes their artifacts to
/// `out`. Provider failures are reported in the artifacts, never thrown.
ReportOutcome run_report(const Corpus& corpus, const ReportOptions& options, const std::filesystem::path& out);

}  // namespace threadscope

#include "threadscope/report.hpp"

#include "threadscope/corpus.hpp"
#include "threadscope/error.hpp"
#include "threadscope/stats.hpp"
#include "threadscope/textproc.hpp"
#include "threadscope/util.hpp"

#include <algorithm>
#include <map>

namespace threadscope {

namespace fs = std::filesystem;

KeyValueDoc run_manifest(const ManifestInputs& in) {
    KeyValueDoc doc;
    doc.set("tool", "threadscope");
    doc.set("tool_version", std::string(kToolVersion));
    doc.set("command", in.command);
    doc.set("seed", in.seed);
    doc.set("stoplist_version", Stoplist::english().version());
    doc.set("stoplist_sha256", Stoplist::english().content_hash());
    doc.set("compressor_id", compressor_id());
    doc.set("compression_level", kCompressionLevel);
    doc.set("post_text", "title+content");
    doc.set("corpus_sha256", in.corpus_hash.value_or("NA"));
    auto providers = in.providers;
    std::sort(providers.begin(), providers.end());
    for (const auto& [role, model] : providers) doc.set("provider." + role, model);
    auto flags = in.flags;
    std::sort(flags.begin(), flags.end());
    for (const auto& [name, value] : flags) doc.set("flag." + name, value);
    return doc;
}

TsvTable histogram_tsv(std::span<const std::pair<std::string, std::vector<double>>> series,
                       std::span<const double> edges) {
    TsvTable t({"series", "bin_lo", "bin_hi", "count"});
    for (const auto& [name, values] : series) {
        std::vector<std::size_t> counts(edges.size() > 1 ? edges.size() - 1 : 0, 0);
        if (!values.empty()) counts = summarize(values, edges).counts;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            t.add_row({name, format_double(edges[i]), format_double(edges[i + 1]), std::to_string(counts[i])});
        }
    }
    return t;
}

namespace {

std::string write_table(const TsvTable& t, const fs::path& out, const std::string& name) {
    t.write(out / name);
    return name;
}

std::string write_doc(const KeyValueDoc& d, const fs::path& out, const std::string& name) {
    d.write(out / name);
    return name;
}

void append(std::vector<std::string>& into, std::vector<std::string> more) {
    into.insert(into.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
}

}  // namespace

KeyValueDoc entropy_summary(std::span<const AgentEntropyRecord> records) {
    KeyValueDoc doc;
    doc.set("n_agents", static_cast<std::uint64_t>(records.size()));
    std::map<DiversityBand, std::size_t> bands;
    std::vector<double> h, ncd;
    for (const auto& r : records) {
        ++bands[r.band];
        h.push_back(r.token_entropy_bits);
        if (r.self_ncd) ncd.push_back(*r.self_ncd);
    }
    for (DiversityBand b : {DiversityBand::High, DiversityBand::Moderate, DiversityBand::Low, DiversityBand::Absent}) {
        const std::string name(to_string(b));
        doc.set("band_" + name, static_cast<std::uint64_t>(bands[b]));
        if (!ncd.empty() && b != DiversityBand::Absent) {
            doc.set("fraction_" + name, static_cast<double>(bands[b]) / static_cast<double>(ncd.size()));
        }
    }
    if (!h.empty()) {
        const auto s = summarize(h);
        doc.set("token_entropy_mean", s.mean);
        doc.set("token_entropy_median", s.median);
    }
    if (!ncd.empty()) {
        const auto s = summarize(ncd);
        doc.set("self_ncd_mean", s.mean);
        doc.set("self_ncd_median", s.median);
    }
    return doc;
}

KeyValueDoc saturation_summary(const SaturationCurve& curve) {
    KeyValueDoc doc;
    doc.set("n_qualifying_posts", static_cast<std::uint64_t>(curve.n_qualifying_posts));
    doc.set("n_sampled_posts", static_cast<std::uint64_t>(curve.n_sampled_posts));
    doc.set("max_position", static_cast<std::uint64_t>(curve.max_position));
    for (std::size_t pos : {1, 4, 14, 29}) {
        if (pos >= curve.points.size()) continue;
        const auto& p = curve.points[pos];
        doc.set("unigram_gain_at_" + std::to_string(pos), p.unigram_gain);
        doc.set("bigram_gain_at_" + std::to_string(pos), p.bigram_gain);
        doc.set("compression_gain_at_" + std::to_string(pos), p.compression_gain);
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        if (!(curve.points[k].unigram_gain < curve.points[k - 1].unigram_gain)) decreasing = false;
    }
    doc.set("unigram_strictly_decreasing", decreasing);
    return doc;
}

std::vector<std::string> write_stats_outputs(const CorpusStats& stats, const MergeReport& report, const fs::path& out) {
    return {write_doc(stats_document(stats, report), out, "corpus_stats.kv")};
}

std::vector<std::string> write_entropy_outputs(std::span<const AgentEntropyRecord> records, const fs::path& out) {
    std::vector<std::string> files;
    files.push_back(write_table(entropy_table_tsv(records), out, "entropy.tsv"));
    files.push_back(write_doc(entropy_summary(records), out, "entropy_summary.kv"));
    std::vector<double> h, ncd;
    for (const auto& r : records) {
        h.push_back(r.token_entropy_bits);
        if (r.self_ncd) ncd.push_back(*r.self_ncd);
    }
    const std::vector<std::pair<std::string, std::vector<double>>> hs{{"token_entropy_bits", h}};
    files.push_back(write_table(histogram_tsv(hs, uniform_edges(0.0, 16.0, 32)), out, "plot_token_entropy_hist.tsv"));
    const std::vector<std::pair<std::string, std::vector<double>>> ns{{"self_ncd", ncd}};
    files.push_back(write_table(histogram_tsv(ns, uniform_edges(0.0, 1.2, 24)), out, "plot_self_ncd_hist.tsv"));
    return files;
}

std::vector<std::string> write_saturation_outputs(const SaturationCurve& curve, const fs::path& out) {
    std::vector<std::string> files;
    files.push_back(write_table(saturation_tsv(curve), out, "saturation.tsv"));
    files.push_back(write_doc(saturation_summary(curve), out, "saturation_summary.kv"));
    TsvTable plot({"position", "measure", "value"});
    for (const auto& p : curve.points) {
        const std::string pos = std::to_string(p.position);
        plot.add_row({pos, "unigram_gain", format_double(p.unigram_gain)});
        plot.add_row({pos, "bigram_gain", format_double(p.bigram_gain)});
        plot.add_row({pos, "compression_gain", format_double(p.compression_gain)});
        plot.add_row({pos, "cumulative_vocab", format_double(p.cumulative_vocab)});
    }
    files.push_back(write_table(plot, out, "plot_saturation.tsv"));
    return files;
}

std::vector<std::string> write_specificity_outputs(const SpecificityReport& report, const fs::path& out) {
    std::vector<std::string> files;
    files.push_back(write_table(specificity_tsv(report.records), out, "specificity.tsv"));
    files.push_back(write_doc(specificity_summary(report), out, "specificity_summary.kv"));
    files.push_back(write_table(length_bucket_tsv(report.length_buckets), out, "specificity_length.tsv"));

    std::vector<double> j, bj, spec;
    for (const auto& r : report.records) {
        j.push_back(r.jaccard_actual);
        bj.push_back(r.baseline_jaccard_mean);
        spec.push_back(r.lexical_spec);
    }
    const std::vector<std::pair<std::string, std::vector<double>>> js{{"actual_post", j}, {"random_posts", bj}};
    files.push_back(write_table(histogram_tsv(js, uniform_edges(0.0, 1.0, 50)), out, "plot_jaccard_hist.tsv"));
    const std::vector<std::pair<std::string, std::vector<double>>> ss{{"lexical_spec", spec}};
    files.push_back(write_table(histogram_tsv(ss, uniform_edges(-1.0, 1.0, 80)), out, "plot_spec_hist.tsv"));
    files.push_back(write_table(length_bucket_tsv(report.length_buckets), out, "plot_spec_by_length.tsv"));

    if (!report.with_embeddings) return files;
    std::vector<double> cos_a, cos_b, sem, sem_zero;
    std::vector<SpecificityRecord> with_sem;
    TsvTable scatter({"comment_id", "lexical_spec", "semantic_spec"});
    for (const auto& r : report.records) {
        if (!r.semantic_spec) continue;
        cos_a.push_back(*r.cos_actual);
        cos_b.push_back(*r.baseline_cos_mean);
        sem.push_back(*r.semantic_spec);
        if (r.jaccard_actual == 0.0) sem_zero.push_back(*r.semantic_spec);
        scatter.add_row({tsv_escape(r.comment_id), format_double(r.lexical_spec), format_double(*r.semantic_spec)});
        with_sem.push_back(r);
    }
    const std::vector<std::pair<std::string, std::vector<double>>> cs{{"actual_post", cos_a}, {"random_posts", cos_b}};
    files.push_back(write_table(histogram_tsv(cs, uniform_edges(-1.0, 1.0, 80)), out, "plot_cosine_hist.tsv"));
    const std::vector<std::pair<std::string, std::vector<double>>> ls{{"lexical_spec", spec}, {"semantic_spec", sem}};
    files.push_back(write_table(histogram_tsv(ls, uniform_edges(-2.0, 2.0, 80)), out, "plot_spec_compare_hist.tsv"));
    files.push_back(write_table(scatter, out, "plot_lexical_vs_semantic.tsv"));
    // Length trend of the semantic measure: reuse the bucketing on semantic values.
    for (auto& r : with_sem) r.lexical_spec = *r.semantic_spec;
    files.push_back(write_table(length_bucket_tsv(length_buckets(with_sem, 10)), out, "plot_semantic_by_length.tsv"));
    const std::vector<std::pair<std::string, std::vector<double>>> zs{{"semantic_spec_zero_jaccard", sem_zero}};
    files.push_back(write_table(histogram_tsv(zs, uniform_edges(-2.0, 2.0, 80)), out, "plot_semantic_zero_overlap_hist.tsv"));
    return files;
}

std::vector<std::string> write_nested_outputs(const NestedReplyReport& report, const fs::path& out) {
    std::vector<std::string> files;
    files.push_back(write_doc(nested_reply_document(report), out, "nested.kv"));
    TsvTable plot({"group", "n", "mean_jaccard", "zero_overlap_fraction", "mean_spec", "median_spec"});
    for (const auto& [name, g] : {std::pair{"top_level", &report.top_level}, std::pair{"nested", &report.nested}}) {
        if (g->n == 0) {
            plot.add_row({name, "0", "NA", "NA", "NA", "NA"});
            continue;
        }
        plot.add_row({name, std::to_string(g->n), format_double(g->mean_jaccard), format_double(g->zero_overlap_fraction),
                     format_double(g->mean_spec), format_double(g->median_spec)});
    }
    files.push_back(write_table(plot, out, "plot_nested.tsv"));
    return files;
}

std::vector<std::string> write_judge_sample_outputs(const JudgeSample& sample, const fs::path& out) {
    KeyValueDoc doc;
    doc.set("n_entries", static_cast<std::uint64_t>(sample.entries.size()));
    doc.set("target_HIGH", static_cast<std::uint64_t>(sample.targets.high));
    doc.set("target_ZERO_OVERLAP", static_cast<std::uint64_t>(sample.targets.zero_overlap));
    doc.set("target_NEGATIVE", static_cast<std::uint64_t>(sample.targets.negative));
    for (Stratum s : {Stratum::High, Stratum::ZeroOverlap, Stratum::Negative}) {
        const std::string name(to_string(s));
        const auto a = sample.available.find(s);
        const auto sf = sample.shortfall.find(s);
        doc.set("available_" + name, static_cast<std::uint64_t>(a == sample.available.end() ? 0 : a->second));
        doc.set("shortfall_" + name, static_cast<std::uint64_t>(sf == sample.shortfall.end() ? 0 : sf->second));
    }
    return {write_table(sample_tsv(sample), out, "judge_sample.tsv"), write_doc(doc, out, "judge_sample.kv")};
}

std::vector<std::string> write_judge_run_outputs(const JudgeRunResult& result, const JudgeRunOptions& options,
                                                 const fs::path& out) {
    std::vector<std::string> files;
    files.push_back(write_table(verdicts_tsv(result.verdicts), out, "judge_verdicts.tsv"));
    files.push_back(write_table(failures_tsv(result.failures), out, "judge_failures.tsv"));
    KeyValueDoc doc;
    doc.set("n_verdicts", static_cast<std::uint64_t>(result.verdicts.size()));
    doc.set("n_failures", static_cast<std::uint64_t>(result.failures.size()));
    if (options.primary != nullptr) {
        doc.set("primary_model", options.primary->model_id());
        doc.set("temperature", options.primary->config().temperature);
        doc.set("max_tokens", options.primary->config().max_tokens);
    }
    if (options.calibration != nullptr) {
        files.push_back(write_table(verdicts_tsv(result.calibration_verdicts), out, "judge_calibration_verdicts.tsv"));
        files.push_back(write_table(failures_tsv(result.calibration_failures), out, "judge_calibration_failures.tsv"));
        doc.set("calibration_model", options.calibration->model_id());
        doc.set("calibration_size", static_cast<std::uint64_t>(options.calibration_size));
        doc.set("n_calibration_verdicts", static_cast<std::uint64_t>(result.calibration_verdicts.size()));
        doc.set("n_calibration_failures", static_cast<std::uint64_t>(result.calibration_failures.size()));
    }
    files.push_back(write_doc(doc, out, "judge_run.kv"));
    return files;
}

std::vector<std::string> write_agreement_outputs(const AgreementStats& stats, const fs::path& out) {
    return {write_doc(agreement_document(stats), out, "judge_agreement.kv")};
}

std::vector<std::string> write_correlation_outputs(const MetricCorrelations& m, std::span<const JudgeVerdict> verdicts,
                                                   std::span<const SpecificityRecord> records, const fs::path& out) {
    std::vector<std::string> files;
    KeyValueDoc doc = correlation_document(m);
    files.push_back(write_doc(doc, out, "judge_correlations.kv"));
    TsvTable cats({"category", "count", "fraction"});
    for (Category c : kAllCategories) {
        const auto it = m.category_counts.find(c);
        const std::size_t n = it == m.category_counts.end() ? 0 : it->second;
        cats.add_row({std::string(to_string(c)), std::to_string(n),
                      format_double(static_cast<double>(n) / static_cast<double>(m.n_joined))});
    }
    files.push_back(write_table(cats, out, "plot_categories.tsv"));

    std::map<std::string_view, const SpecificityRecord*> by_id;
    for (const auto& r : records) by_id.emplace(r.comment_id, &r);
    TsvTable lex({"comment_id", "responsiveness", "jaccard_actual", "lexical_spec"});
    TsvTable sem({"comment_id", "responsiveness", "semantic_spec"});
    for (const auto& v : verdicts) {
        const auto it = by_id.find(v.comment_id);
        if (it == by_id.end()) continue;
        const auto& r = *it->second;
        lex.add_row({tsv_escape(v.comment_id), std::to_string(v.responsiveness), format_double(r.jaccard_actual),
                     format_double(r.lexical_spec)});
        if (r.semantic_spec) {
            sem.add_row({tsv_escape(v.comment_id), std::to_string(v.responsiveness), format_double(*r.semantic_spec)});
        }
    }
    files.push_back(write_table(lex, out, "plot_responsiveness_vs_lexical.tsv"));
    files.push_back(write_table(sem, out, "plot_responsiveness_vs_semantic.tsv"));
    files.push_back(write_table(category_by_stratum_tsv(m), out, "plot_category_by_stratum.tsv"));
    return files;
}

std::string_view to_string(Analysis a) {
    switch (a) {
        case Analysis::Stats: return "stats";
        case Analysis::Entropy: return "entropy";
        case Analysis::Saturation: return "saturation";
        case Analysis::Specificity: return "specificity";
        case Analysis::Nested: return "nested";
        case Analysis::Judge: return "judge";
    }
    return "stats";
}

std::optional<Analysis> parse_analysis(std::string_view name) {
    for (Analysis a : {Analysis::Stats, Analysis::Entropy, Analysis::Saturation, Analysis::Specificity,
                       Analysis::Nested, Analysis::Judge}) {
        if (name == to_string(a)) return a;
    }
    return std::nullopt;
}

ReportOutcome run_report(const Corpus& corpus, const ReportOptions& options, const fs::path& out) {
    fs::create_directories(out);
    ReportOutcome outcome;
    const auto selected = [&](Analysis a) { return options.analyses.count(a) != 0; };

    if (selected(Analysis::Stats)) {
        append(outcome.files, write_stats_outputs(corpus_stats(corpus), corpus.merge_report(), out));
    }
    if (selected(Analysis::Entropy)) {
        append(outcome.files, write_entropy_outputs(agent_entropy_table(corpus, options.entropy), out));
    }
    if (selected(Analysis::Saturation)) {
        append(outcome.files, write_saturation_outputs(aggregate_curves(corpus, options.saturation), out));
    }
    const bool judge = selected(Analysis::Judge);
    if (judge && options.judge.primary == nullptr) {
        throw Error(ErrorKind::InvalidArgument, "report: the judge analysis needs a judge provider");
    }
    if (!selected(Analysis::Specificity) && !selected(Analysis::Nested) && !judge) return outcome;

    SpecificityOptions spec_opts = options.specificity;
    if (!selected(Analysis::Specificity)) spec_opts.embeddings = nullptr;
    const SpecificityReport spec = specificity_report(corpus, spec_opts);
    if (selected(Analysis::Specificity)) {
        append(outcome.files, write_specificity_outputs(spec, out));
        for (const auto& r : spec.records) {
            if (spec.with_embeddings && !r.semantic_spec) ++outcome.semantic_absent;
        }
    }
    if (selected(Analysis::Nested)) {
        append(outcome.files, write_nested_outputs(nested_reply_report(corpus, spec.records), out));
    }
    if (judge) {
        const JudgeSample sample = build_sample(spec.records, options.judge_targets, options.seed);
        append(outcome.files, write_judge_sample_outputs(sample, out));
        const JudgeRunResult result = run_judgement(corpus, sample, options.judge);
        append(outcome.files, write_judge_run_outputs(result, options.judge, out));
        outcome.judge_failures = result.failures.size() + result.calibration_failures.size();
        if (options.judge.calibration != nullptr) {
            try {
                append(outcome.files,
                       write_agreement_outputs(agreement_stats(result.verdicts, result.calibration_verdicts), out));
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::InvalidArgument) throw;
            }
        }
        if (!result.verdicts.empty()) {
            append(outcome.files, write_correlation_outputs(metric_correlations(result.verdicts, spec.records),
                                                            result.verdicts, spec.records, out));
        }
    }
    return outcome;
}

}  // namespace threadscope

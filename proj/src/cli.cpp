#include "threadscope/cli.hpp"

#include "threadscope/corpus.hpp"
#include "threadscope/error.hpp"
#include "threadscope/providers.hpp"
#include "threadscope/report.hpp"
#include "threadscope/synth.hpp"
#include "threadscope/util.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <ostream>

namespace threadscope {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string cache_dir;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::size_t max_in_flight = 4;
    std::size_t retries = 3;
    std::string openai_key_env = "OPENAI_API_KEY";
    std::string anthropic_key_env = "ANTHROPIC_API_KEY";
};

// Flag values of every option parsed on `apps`, for the manifest. The output
// location is not an input and is left out.
std::vector<std::pair<std::string, std::string>> collect_flags(const std::vector<const CLI::App*>& apps) {
    std::vector<std::pair<std::string, std::string>> flags;
    for (const CLI::App* app : apps) {
        for (const CLI::Option* opt : app->get_options()) {
            std::string name = opt->get_single_name();
            if (name.empty() || name == "help" || name == "out") continue;
            std::string value;
            if (opt->count() > 0) {
                for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
                if (value.empty()) value = "true";
            } else {
                value = opt->get_default_str();
            }
            if (!value.empty()) flags.emplace_back(std::move(name), std::move(value));
        }
    }
    return flags;
}

class Command {
public:
    Command(const Globals& g, std::ostream& out, std::ostream& err) : g_(g), out_(out), err_(err) {}

    ProviderConfig provider_config(const std::string& spec) const {
        ProviderConfig cfg = ProviderConfig::parse(spec);
        if (cfg.kind == "openai") cfg.credential_env = g_.openai_key_env;
        if (cfg.kind == "anthropic") cfg.credential_env = g_.anthropic_key_env;
        cfg.max_in_flight = g_.max_in_flight;
        if (cfg.kind != "mock") cfg.retry_budget = g_.retries;
        if (!cfg.credential_env.empty()) {
            const char* v = std::getenv(cfg.credential_env.c_str());
            if (v == nullptr || *v == '\0') {
                throw Error(ErrorKind::InvalidArgument,
                            "environment variable " + cfg.credential_env + " holding the provider credential is not set");
            }
        }
        return cfg;
    }

    std::shared_ptr<ResponseCache> cache() const {
        if (g_.cache_dir.empty()) return nullptr;
        if (!cache_) cache_ = std::make_shared<ResponseCache>(g_.cache_dir);
        return cache_;
    }

    std::unique_ptr<EmbeddingClient> embedding_client(const std::string& spec) {
        const ProviderConfig cfg = provider_config(spec);
        auto client = std::make_unique<EmbeddingClient>(std::shared_ptr<EmbeddingBackend>(make_embedding_backend(cfg)),
                                                        cfg, cache());
        providers_.emplace_back("embedding", client->model_id());
        return client;
    }

    std::unique_ptr<JudgeClient> judge_client(const std::string& spec, const std::string& role) {
        const ProviderConfig cfg = provider_config(spec);
        auto client = std::make_unique<JudgeClient>(std::shared_ptr<CompletionBackend>(make_completion_backend(cfg)),
                                                    cfg, cache());
        providers_.emplace_back(role, client->model_id());
        return client;
    }

    void log_counters(const std::string& what, const ProviderCounters& c) const {
        err_ << fmt::format("{}: requests={} cache_hits={} network_fetches={} absent={} rejected={}\n", what,
                            c.requests, c.cache_hits, c.network_fetches, c.absent, c.rejected);
    }

    void write_manifest(const fs::path& out, const std::string& command, const std::vector<const CLI::App*>& apps,
                        const std::optional<fs::path>& corpus_dir) const {
        ManifestInputs in;
        in.command = command;
        in.seed = g_.seed;
        in.flags = collect_flags(apps);
        if (corpus_dir) in.corpus_hash = corpus_content_hash(*corpus_dir);
        in.providers = providers_;
        fs::create_directories(out);
        run_manifest(in).write(out / "manifest.kv");
    }

    void report_files(const fs::path& out, const std::vector<std::string>& files) const {
        for (const auto& f : files) out_ << (out / f).string() << '\n';
    }

    const Globals& g_;
    std::ostream& out_;
    std::ostream& err_;

private:
    mutable std::shared_ptr<ResponseCache> cache_;
    std::vector<std::pair<std::string, std::string>> providers_;
};

std::set<Analysis> parse_analyses(const std::string& list) {
    std::set<Analysis> out;
    for (const auto& name : split(list, ',')) {
        if (name.empty()) continue;
        const auto a = parse_analysis(name);
        if (!a) throw Error(ErrorKind::InvalidArgument, "unknown analysis '" + name + "'");
        out.insert(*a);
    }
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Information-content and relevance metrics for multi-agent conversation corpora", "threadscope"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(kToolVersion));

    Globals g;
    app.add_option("--cache-dir", g.cache_dir, "Persistent provider response cache directory");
    app.add_option("--seed", g.seed, "Master seed; every sampler derives from it")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads for per-item parallel work")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--max-in-flight", g.max_in_flight, "Concurrent provider requests")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--retries", g.retries, "Provider retries after the first attempt")->capture_default_str();
    app.add_option("--openai-key-env", g.openai_key_env, "Environment variable holding the OpenAI credential")->capture_default_str();
    app.add_option("--anthropic-key-env", g.anthropic_key_env, "Environment variable holding the Anthropic credential")->capture_default_str();

    // ingest ------------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Merge snapshots into a canonical corpus directory");
    std::vector<std::string> snapshots;
    std::string schema_path, out_dir;
    ingest->add_option("--snapshot", snapshots, "Snapshot directory or file, highest precedence first")->required();
    ingest->add_option("--schema", schema_path, "Field-mapping schema (JSON)");
    ingest->add_option("--out", out_dir, "Output corpus directory")->required();

    // stats -------------------------------------------------------------------
    auto* stats = app.add_subcommand("stats", "Corpus summary statistics");
    std::string corpus_dir;
    stats->add_option("--corpus", corpus_dir, "Ingested corpus directory")->required();
    stats->add_option("--out", out_dir, "Write corpus_stats.kv and a manifest here");

    // entropy -----------------------------------------------------------------
    auto* entropy = app.add_subcommand("entropy", "Per-agent token entropy and self-NCD");
    EntropyOptions eopt;
    entropy->add_option("--corpus", corpus_dir)->required();
    entropy->add_option("--min-comments", eopt.min_comments)->capture_default_str();
    entropy->add_option("--pair-budget", eopt.pair_budget)->capture_default_str();
    entropy->add_option("--sample", eopt.sample, "Analyse a seeded subsample of agents (0 = all)")->capture_default_str();
    entropy->add_option("--out", out_dir)->required();

    // saturation --------------------------------------------------------------
    auto* saturation = app.add_subcommand("saturation", "Information saturation curve");
    SaturationOptions sopt;
    saturation->add_option("--corpus", corpus_dir)->required();
    saturation->add_option("--min-comments", sopt.min_comments)->capture_default_str();
    saturation->add_option("--sample", sopt.sample_size)->capture_default_str();
    saturation->add_option("--max-pos", sopt.max_position)->capture_default_str()->check(CLI::PositiveNumber);
    saturation->add_option("--out", out_dir)->required();

    // specificity -------------------------------------------------------------
    auto* specificity = app.add_subcommand("specificity", "Lexical (and semantic) post-comment specificity");
    SpecificityOptions popt;
    bool with_embeddings = false;
    std::string embedding_provider;
    specificity->add_option("--corpus", corpus_dir)->required();
    specificity->add_option("--sample", popt.sample_size)->capture_default_str();
    specificity->add_option("--baseline", popt.baseline_r)->capture_default_str();
    specificity->add_option("--semantic-threshold", popt.semantic_threshold)->capture_default_str();
    specificity->add_flag("--embeddings", with_embeddings, "Also compute semantic specificity");
    specificity->add_option("--embedding-provider", embedding_provider, "mock:<fixture>, openai:<model>[@url]");
    specificity->add_option("--out", out_dir)->required();

    // nested-report -----------------------------------------------------------
    auto* nested = app.add_subcommand("nested-report", "Top-level versus nested reply relevance");
    nested->add_option("--corpus", corpus_dir)->required();
    nested->add_option("--sample", popt.sample_size)->capture_default_str();
    nested->add_option("--baseline", popt.baseline_r)->capture_default_str();
    nested->add_option("--out", out_dir)->required();

    // judge -------------------------------------------------------------------
    auto* judge = app.add_subcommand("judge", "LLM-as-judge validation");
    judge->require_subcommand(1);
    SampleTargets targets;
    std::string spec_path, sample_path, judge_provider, calibration_provider, verdicts_a, verdicts_b;
    std::size_t calibration_size = 200;

    auto* jsample = judge->add_subcommand("sample", "Stratified judge sample from specificity records");
    jsample->add_option("--specificity", spec_path, "specificity.tsv")->required();
    jsample->add_option("--high", targets.high)->capture_default_str();
    jsample->add_option("--zero", targets.zero_overlap)->capture_default_str();
    jsample->add_option("--negative", targets.negative)->capture_default_str();
    jsample->add_option("--out", out_dir)->required();

    auto* jrun = judge->add_subcommand("run", "Judge a sample");
    jrun->add_option("--corpus", corpus_dir)->required();
    jrun->add_option("--sample", sample_path, "judge_sample.tsv")->required();
    jrun->add_option("--provider", judge_provider, "mock:<fixture>, openai:<model>, anthropic:<model>")->required();
    jrun->add_option("--calibration-provider", calibration_provider);
    jrun->add_option("--calibration-size", calibration_size)->capture_default_str();
    jrun->add_option("--out", out_dir)->required();

    auto* jagree = judge->add_subcommand("agree", "Agreement between two verdict files");
    jagree->add_option("--a", verdicts_a, "Primary verdicts TSV")->required();
    jagree->add_option("--b", verdicts_b, "Calibration verdicts TSV")->required();
    jagree->add_option("--out", out_dir)->required();

    auto* jcorr = judge->add_subcommand("correlate", "Judge scores versus specificity");
    jcorr->add_option("--verdicts", verdicts_a)->required();
    jcorr->add_option("--specificity", spec_path)->required();
    jcorr->add_option("--out", out_dir)->required();

    // synth -------------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    std::string config_path;
    synth->add_option("--config", config_path, "key=value generator config")->required();
    synth->add_option("--out", out_dir)->required();

    // report ------------------------------------------------------------------
    auto* report = app.add_subcommand("report", "Run several analyses end to end");
    bool all = false;
    std::string analyses;
    report->add_option("--corpus", corpus_dir)->required();
    report->add_flag("--all", all, "Every analysis (judge only with --judge-provider)");
    report->add_option("--analyses", analyses, "Comma list: stats,entropy,saturation,specificity,nested,judge");
    report->add_option("--embedding-provider", embedding_provider);
    report->add_option("--judge-provider", judge_provider);
    report->add_option("--calibration-provider", calibration_provider);
    report->add_option("--calibration-size", calibration_size)->capture_default_str();
    report->add_option("--entropy-min-comments", eopt.min_comments)->capture_default_str();
    report->add_option("--saturation-min-comments", sopt.min_comments)->capture_default_str();
    report->add_option("--saturation-sample", sopt.sample_size)->capture_default_str();
    report->add_option("--max-pos", sopt.max_position)->capture_default_str();
    report->add_option("--specificity-sample", popt.sample_size)->capture_default_str();
    report->add_option("--baseline", popt.baseline_r)->capture_default_str();
    report->add_option("--out", out_dir)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    Command cmd(g, out, err);
    eopt.seed = sopt.seed = popt.seed = g.seed;
    eopt.jobs = sopt.jobs = popt.jobs = g.jobs;

    try {
        if (ingest->parsed()) {
            std::optional<SnapshotSchema> schema;
            if (!schema_path.empty()) schema = SnapshotSchema::from_json_file(schema_path);
            std::vector<Snapshot> snaps;
            for (const auto& s : snapshots) snaps.push_back(load_snapshot(s, schema));
            const Corpus corpus = resolve_depths(merge_dedup(snaps));
            write_corpus_dir(corpus, out_dir);
            cmd.write_manifest(out_dir, "ingest", {&app, ingest}, fs::path(out_dir));
            const auto& r = corpus.merge_report();
            out << fmt::format("posts={} comments={} agents={} skipped_lines={} collisions={}/{}/{}\n",
                               corpus.posts().size(), corpus.comments().size(), corpus.agents().size(),
                               r.skipped_lines, r.post_collisions, r.comment_collisions, r.agent_collisions);
        } else if (stats->parsed()) {
            const Corpus corpus = read_corpus_dir(corpus_dir);
            const auto doc = stats_document(corpus_stats(corpus), corpus.merge_report());
            if (out_dir.empty()) {
                out << doc.to_string();
            } else {
                fs::create_directories(out_dir);
                cmd.report_files(out_dir, write_stats_outputs(corpus_stats(corpus), corpus.merge_report(), out_dir));
                cmd.write_manifest(out_dir, "stats", {&app, stats}, fs::path(corpus_dir));
            }
        } else if (entropy->parsed()) {
            const Corpus corpus = read_corpus_dir(corpus_dir);
            fs::create_directories(out_dir);
            cmd.report_files(out_dir, write_entropy_outputs(agent_entropy_table(corpus, eopt), out_dir));
            cmd.write_manifest(out_dir, "entropy", {&app, entropy}, fs::path(corpus_dir));
        } else if (saturation->parsed()) {
            const Corpus corpus = read_corpus_dir(corpus_dir);
            fs::create_directories(out_dir);
            cmd.report_files(out_dir, write_saturation_outputs(aggregate_curves(corpus, sopt), out_dir));
            cmd.write_manifest(out_dir, "saturation", {&app, saturation}, fs::path(corpus_dir));
        } else if (specificity->parsed()) {
            const Corpus corpus = read_corpus_dir(corpus_dir);
            std::unique_ptr<EmbeddingClient> client;
            if (with_embeddings) {
                if (embedding_provider.empty()) {
                    throw Error(ErrorKind::InvalidArgument, "--embeddings needs --embedding-provider");
                }
                client = cmd.embedding_client(embedding_provider);
                popt.embeddings = client.get();
            }
            const SpecificityReport rep = specificity_report(corpus, popt);
            fs::create_directories(out_dir);
            cmd.report_files(out_dir, write_specificity_outputs(rep, out_dir));
            if (client) cmd.log_counters("embeddings", client->counters());
            cmd.write_manifest(out_dir, "specificity", {&app, specificity}, fs::path(corpus_dir));
        } else if (nested->parsed()) {
            const Corpus corpus = read_corpus_dir(corpus_dir);
            const SpecificityReport rep = specificity_report(corpus, popt);
            fs::create_directories(out_dir);
            cmd.report_files(out_dir, write_nested_outputs(nested_reply_report(corpus, rep.records), out_dir));
            cmd.write_manifest(out_dir, "nested-report", {&app, nested}, fs::path(corpus_dir));
        } else if (jsample->parsed()) {
            const auto records = parse_specificity_tsv(TsvTable::read(spec_path));
            const JudgeSample sample = build_sample(records, targets, g.seed);
            fs::create_directories(out_dir);
            cmd.report_files(out_dir, write_judge_sample_outputs(sample, out_dir));
            for (const auto& [stratum, missing] : sample.shortfall) {
                err << fmt::format("warning: stratum {} short by {}\n", to_string(stratum), missing);
            }
            cmd.write_manifest(out_dir, "judge sample", {&app, judge, jsample}, std::nullopt);
        } else if (jrun->parsed()) {
            const Corpus corpus = read_corpus_dir(corpus_dir);
            const JudgeSample sample = parse_sample_tsv(TsvTable::read(sample_path));
            auto primary = cmd.judge_client(judge_provider, "judge");
            std::unique_ptr<JudgeClient> calibration;
            if (!calibration_provider.empty()) calibration = cmd.judge_client(calibration_provider, "calibration");
            JudgeRunOptions jopt{primary.get(), calibration.get(), calibration_size};
            const JudgeRunResult result = run_judgement(corpus, sample, jopt);
            fs::create_directories(out_dir);
            cmd.report_files(out_dir, write_judge_run_outputs(result, jopt, out_dir));
            cmd.log_counters("judge", primary->counters());
            if (calibration) cmd.log_counters("calibration", calibration->counters());
            cmd.write_manifest(out_dir, "judge run", {&app, judge, jrun}, fs::path(corpus_dir));
        } else if (jagree->parsed()) {
            const auto a = parse_verdicts_tsv(TsvTable::read(verdicts_a));
            const auto b = parse_verdicts_tsv(TsvTable::read(verdicts_b));
            fs::create_directories(out_dir);
            cmd.report_files(out_dir, write_agreement_outputs(agreement_stats(a, b), out_dir));
            cmd.write_manifest(out_dir, "judge agree", {&app, judge, jagree}, std::nullopt);
        } else if (jcorr->parsed()) {
            const auto verdicts = parse_verdicts_tsv(TsvTable::read(verdicts_a));
            const auto records = parse_specificity_tsv(TsvTable::read(spec_path));
            const MetricCorrelations m = metric_correlations(verdicts, records);
            fs::create_directories(out_dir);
            cmd.report_files(out_dir, write_correlation_outputs(m, verdicts, records, out_dir));
            if (!m.orphans.empty()) err << fmt::format("warning: {} verdicts have no specificity record\n", m.orphans.size());
            cmd.write_manifest(out_dir, "judge correlate", {&app, judge, jcorr}, std::nullopt);
        } else if (synth->parsed()) {
            const SynthConfig config = SynthConfig::read(config_path);
            write_corpus_dir(generate_corpus(config), out_dir);
            cmd.write_manifest(out_dir, "synth", {&app, synth}, fs::path(out_dir));
        } else if (report->parsed()) {
            ReportOptions ropt;
            if (all) {
                ropt.analyses = {Analysis::Stats, Analysis::Entropy, Analysis::Saturation, Analysis::Specificity,
                                 Analysis::Nested};
                if (!judge_provider.empty()) ropt.analyses.insert(Analysis::Judge);
            }
            for (Analysis a : parse_analyses(analyses)) ropt.analyses.insert(a);
            if (ropt.analyses.empty()) throw Error(ErrorKind::InvalidArgument, "report: select --all or --analyses");
            const Corpus corpus = read_corpus_dir(corpus_dir);
            ropt.entropy = eopt;
            ropt.saturation = sopt;
            ropt.specificity = popt;
            ropt.seed = g.seed;
            // Providers are touched only for analyses that need them.
            std::unique_ptr<EmbeddingClient> emb;
            if (ropt.analyses.count(Analysis::Specificity) && !embedding_provider.empty()) {
                emb = cmd.embedding_client(embedding_provider);
                ropt.specificity.embeddings = emb.get();
            }
            std::unique_ptr<JudgeClient> primary, calibration;
            if (ropt.analyses.count(Analysis::Judge)) {
                if (judge_provider.empty()) throw Error(ErrorKind::InvalidArgument, "judge analysis needs --judge-provider");
                primary = cmd.judge_client(judge_provider, "judge");
                if (!calibration_provider.empty()) calibration = cmd.judge_client(calibration_provider, "calibration");
                ropt.judge = JudgeRunOptions{primary.get(), calibration.get(), calibration_size};
            }
            const ReportOutcome outcome = run_report(corpus, ropt, out_dir);
            cmd.report_files(out_dir, outcome.files);
            if (emb) cmd.log_counters("embeddings", emb->counters());
            if (primary) cmd.log_counters("judge", primary->counters());
            if (calibration) cmd.log_counters("calibration", calibration->counters());
            if (outcome.semantic_absent > 0 || outcome.judge_failures > 0) {
                err << fmt::format("completeness: semantic_absent={} judge_failures={}\n", outcome.semantic_absent,
                                   outcome.judge_failures);
            }
            cmd.write_manifest(out_dir, "report", {&app, report}, fs::path(corpus_dir));
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace threadscope

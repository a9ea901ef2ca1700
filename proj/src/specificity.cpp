#include "threadscope/specificity.hpp"

#include "threadscope/corpus.hpp"
#include "threadscope/error.hpp"
#include "threadscope/stats.hpp"
#include "threadscope/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

namespace threadscope {

double jaccard(const ContentWordSet& a, const ContentWordSet& b) {
    const auto& x = a.words();
    const auto& y = b.words();
    if (x.empty() && y.empty()) return 0.0;
    std::size_t inter = 0;
    auto i = x.begin();
    auto j = y.begin();
    while (i != x.end() && j != y.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = x.size() + y.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double cosine(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "cosine: dimensions " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<double>(u[i]) * v[i];
        nu += static_cast<double>(u[i]) * u[i];
        nv += static_cast<double>(v[i]) * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw Error(ErrorKind::Degenerate, "cosine: zero vector");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

LexicalSpecificity lexical_specificity(const ContentWordSet& comment, const ContentWordSet& post,
                                       std::span<const ContentWordSet> baselines) {
    LexicalSpecificity out;
    out.jaccard_actual = jaccard(comment, post);
    if (!baselines.empty()) {
        double sum = 0.0;
        for (const auto& b : baselines) sum += jaccard(comment, b);
        out.baseline_jaccard_mean = sum / static_cast<double>(baselines.size());
    }
    out.spec = out.jaccard_actual - out.baseline_jaccard_mean;
    return out;
}

SemanticSpecificity semantic_specificity(const EmbeddingVector& comment, const EmbeddingVector& post,
                                         std::span<const EmbeddingVector> baselines) {
    SemanticSpecificity out;
    out.cos_actual = cosine(comment, post);
    if (!baselines.empty()) {
        double sum = 0.0;
        for (const auto& b : baselines) sum += cosine(comment, b);
        out.baseline_cos_mean = sum / static_cast<double>(baselines.size());
    }
    out.spec = out.cos_actual - out.baseline_cos_mean;
    return out;
}

std::string_view to_string(Stratum s) {
    switch (s) {
        case Stratum::High: return "HIGH";
        case Stratum::ZeroOverlap: return "ZERO_OVERLAP";
        case Stratum::Negative: return "NEGATIVE";
        case Stratum::Other: return "OTHER";
    }
    return "OTHER";
}

std::optional<Stratum> parse_stratum(std::string_view s) {
    if (s == "HIGH") return Stratum::High;
    if (s == "ZERO_OVERLAP") return Stratum::ZeroOverlap;
    if (s == "NEGATIVE") return Stratum::Negative;
    if (s == "OTHER") return Stratum::Other;
    return std::nullopt;
}

Stratum stratify(double jaccard_actual, double lexical_spec, double epsilon) {
    if (jaccard_actual == 0.0) return Stratum::ZeroOverlap;
    if (lexical_spec < -epsilon) return Stratum::Negative;
    if (lexical_spec > epsilon) return Stratum::High;
    return Stratum::Other;
}

std::vector<std::size_t> sample_baseline_posts(std::size_t n_posts, std::size_t exclude, std::size_t r,
                                               std::uint64_t seed) {
    if (n_posts <= 1) return {};
    Rng rng(seed);
    const auto picks = sample_indices(n_posts - 1, r, rng);
    std::vector<std::size_t> out;
    out.reserve(picks.size());
    for (auto p : picks) out.push_back(p >= exclude ? static_cast<std::size_t>(p) + 1 : static_cast<std::size_t>(p));
    return out;
}

std::vector<LengthBucket> length_buckets(std::span<const SpecificityRecord> records, std::size_t n) {
    if (n == 0 || records.empty()) return {};
    std::vector<const SpecificityRecord*> order;
    order.reserve(records.size());
    for (const auto& r : records) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
        if (a->comment_content_len != b->comment_content_len) return a->comment_content_len < b->comment_content_len;
        return a->comment_id < b->comment_id;
    });
    const std::size_t buckets = std::min(n, order.size());
    std::vector<LengthBucket> out;
    for (std::size_t b = 0; b < buckets; ++b) {
        const std::size_t begin = b * order.size() / buckets;
        const std::size_t end = (b + 1) * order.size() / buckets;
        LengthBucket lb;
        lb.index = b;
        lb.n = end - begin;
        lb.min_len = order[begin]->comment_content_len;
        lb.max_len = order[end - 1]->comment_content_len;
        std::vector<double> js, ss;
        for (std::size_t i = begin; i < end; ++i) {
            js.push_back(order[i]->jaccard_actual);
            ss.push_back(order[i]->lexical_spec);
        }
        lb.mean_spec = mean(ss);
        std::sort(js.begin(), js.end());
        std::sort(ss.begin(), ss.end());
        lb.median_jaccard = quantile_nearest_rank_sorted(js, 0.5);
        lb.median_spec = quantile_nearest_rank_sorted(ss, 0.5);
        out.push_back(lb);
    }
    return out;
}

namespace {

void attach_semantic(const Corpus& corpus, SpecificityReport& report, EmbeddingClient& client,
                     const std::vector<std::string>& post_texts) {
    // One request over the distinct texts, in a fixed order.
    std::map<std::string, std::size_t> slot;
    for (const auto& rec : report.records) {
        slot.emplace(corpus.find_comment(rec.comment_id)->content, 0);
        slot.emplace(post_texts[*corpus.post_index(rec.post_id)], 0);
        for (const auto& b : rec.baseline_post_ids) slot.emplace(post_texts[*corpus.post_index(b)], 0);
    }
    std::vector<std::string> texts;
    texts.reserve(slot.size());
    for (auto& [text, idx] : slot) {
        idx = texts.size();
        texts.push_back(text);
    }
    const EmbedResult embedded = client.embed_batch(texts);
    auto vec = [&](const std::string& text) -> const std::optional<EmbeddingVector>& {
        return embedded.vectors[slot.at(text)];
    };
    auto truncated = [&](const std::string& text) { return static_cast<bool>(embedded.truncated[slot.at(text)]); };

    for (auto& rec : report.records) {
        const std::string& ctext = corpus.find_comment(rec.comment_id)->content;
        const std::string& ptext = post_texts[*corpus.post_index(rec.post_id)];
        rec.embed_truncated = truncated(ctext) || truncated(ptext);
        const auto& ce = vec(ctext);
        const auto& pe = vec(ptext);
        if (!ce || !pe) continue;
        std::vector<EmbeddingVector> base;
        bool complete = true;
        for (const auto& b : rec.baseline_post_ids) {
            const std::string& btext = post_texts[*corpus.post_index(b)];
            rec.embed_truncated = rec.embed_truncated || truncated(btext);
            const auto& be = vec(btext);
            if (!be) {
                complete = false;
                break;
            }
            base.push_back(*be);
        }
        if (!complete) continue;
        try {
            const auto s = semantic_specificity(*ce, *pe, base);
            rec.cos_actual = s.cos_actual;
            rec.baseline_cos_mean = s.baseline_cos_mean;
            rec.semantic_spec = s.spec;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Degenerate) throw;
        }
    }
}

}  // namespace

SpecificityReport specificity_report(const Corpus& corpus, const SpecificityOptions& options) {
    SpecificityReport report;
    report.baseline_r = options.baseline_r;
    report.semantic_threshold = options.semantic_threshold;
    report.with_embeddings = options.embeddings != nullptr;

    std::vector<std::size_t> candidates;
    for (std::size_t p = 0; p < corpus.posts().size(); ++p) {
        for (std::size_t ci : corpus.comments_of_post(p)) {
            if (corpus.comments()[ci].is_resolved()) candidates.push_back(ci);
        }
    }
    std::sort(candidates.begin(), candidates.end());
    report.n_candidate_pairs = candidates.size();
    if (candidates.empty()) throw Error(ErrorKind::EmptyInput, "specificity_report: no (post, comment) pairs");

    Rng rng(derive_seed(options.seed, "specificity-sample"));
    const auto picks = sample_indices(candidates.size(), options.sample_size, rng);

    const auto& posts = corpus.posts();
    std::vector<std::string> post_texts(posts.size());
    std::vector<ContentWordSet> post_words(posts.size());
    parallel_for(posts.size(), options.jobs, [&](std::size_t p) {
        post_texts[p] = post_text(posts[p]);
        post_words[p] = content_words(tokenize(post_texts[p]));
    });

    const Stoplist& stop = Stoplist::english();
    report.records.resize(picks.size());
    parallel_for(picks.size(), options.jobs, [&](std::size_t i) {
        const Comment& c = corpus.comments()[candidates[picks[i]]];
        const std::size_t post_idx = *corpus.post_index(c.post_id);
        const TokenSequence tokens = tokenize(c.content);
        const ContentWordSet words = content_words(tokens, stop);
        const auto baseline_idx =
            sample_baseline_posts(posts.size(), post_idx, options.baseline_r, derive_seed(options.seed, c.id));
        std::vector<ContentWordSet> baselines;
        baselines.reserve(baseline_idx.size());
        for (auto b : baseline_idx) baselines.push_back(post_words[b]);
        const auto lex = lexical_specificity(words, post_words[post_idx], baselines);

        SpecificityRecord& rec = report.records[i];
        rec.comment_id = c.id;
        rec.post_id = c.post_id;
        rec.depth = c.depth;
        rec.comment_content_len =
            static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), [&](const std::string& t) { return !stop.contains(t); }));
        rec.jaccard_actual = lex.jaccard_actual;
        rec.baseline_jaccard_mean = lex.baseline_jaccard_mean;
        rec.lexical_spec = lex.spec;
        rec.stratum = stratify(lex.jaccard_actual, lex.spec, options.epsilon);
        for (auto b : baseline_idx) rec.baseline_post_ids.push_back(posts[b].id);
    });
    // Candidates are in comment-id order and picks ascend, so records do too.

    if (options.embeddings != nullptr) attach_semantic(corpus, report, *options.embeddings, post_texts);
    report.length_buckets = length_buckets(report.records, options.n_length_buckets);
    return report;
}

namespace {

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); }

double parse_double_cell(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(ErrorKind::Schema, "not a number: '" + s + "'");
    return v;
}

std::optional<double> parse_opt_cell(const std::string& s) {
    if (s == "NA") return std::nullopt;
    return parse_double_cell(s);
}

std::uint64_t parse_uint_cell(const std::string& s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(ErrorKind::Schema, "not an integer: '" + s + "'");
    return v;
}

}  // namespace

TsvTable specificity_tsv(std::span<const SpecificityRecord> records) {
    TsvTable t({"comment_id", "post_id", "depth", "comment_content_len", "jaccard_actual", "baseline_jaccard_mean",
                "lexical_spec", "cos_actual", "baseline_cos_mean", "semantic_spec", "stratum", "embed_truncated",
                "baseline_post_ids"});
    for (const auto& r : records) {
        std::string ids;
        for (const auto& b : r.baseline_post_ids) {
            if (!ids.empty()) ids += ',';
            ids += tsv_escape(b);
        }
        t.add_row({tsv_escape(r.comment_id), tsv_escape(r.post_id), r.depth ? std::to_string(*r.depth) : "NA",
                   std::to_string(r.comment_content_len), format_double(r.jaccard_actual),
                   format_double(r.baseline_jaccard_mean), format_double(r.lexical_spec), opt_cell(r.cos_actual),
                   opt_cell(r.baseline_cos_mean), opt_cell(r.semantic_spec), std::string(to_string(r.stratum)),
                   r.embed_truncated ? "1" : "0", ids});
    }
    return t;
}

std::vector<SpecificityRecord> parse_specificity_tsv(const TsvTable& table) {
    const std::size_t c_comment = table.column("comment_id"), c_post = table.column("post_id"),
                      c_depth = table.column("depth"), c_len = table.column("comment_content_len"),
                      c_j = table.column("jaccard_actual"), c_bj = table.column("baseline_jaccard_mean"),
                      c_spec = table.column("lexical_spec"), c_cos = table.column("cos_actual"),
                      c_bcos = table.column("baseline_cos_mean"), c_sem = table.column("semantic_spec"),
                      c_stratum = table.column("stratum"), c_trunc = table.column("embed_truncated"),
                      c_base = table.column("baseline_post_ids");
    std::vector<SpecificityRecord> out;
    out.reserve(table.rows().size());
    for (const auto& row : table.rows()) {
        SpecificityRecord r;
        r.comment_id = row[c_comment];
        r.post_id = row[c_post];
        if (row[c_depth] != "NA") r.depth = static_cast<std::uint32_t>(parse_uint_cell(row[c_depth]));
        r.comment_content_len = parse_uint_cell(row[c_len]);
        r.jaccard_actual = parse_double_cell(row[c_j]);
        r.baseline_jaccard_mean = parse_double_cell(row[c_bj]);
        r.lexical_spec = parse_double_cell(row[c_spec]);
        r.cos_actual = parse_opt_cell(row[c_cos]);
        r.baseline_cos_mean = parse_opt_cell(row[c_bcos]);
        r.semantic_spec = parse_opt_cell(row[c_sem]);
        const auto s = parse_stratum(row[c_stratum]);
        if (!s) throw Error(ErrorKind::Schema, "unknown stratum '" + row[c_stratum] + "'");
        r.stratum = *s;
        r.embed_truncated = row[c_trunc] == "1";
        if (!row[c_base].empty()) r.baseline_post_ids = split(row[c_base], ',');
        out.push_back(std::move(r));
    }
    return out;
}

TsvTable length_bucket_tsv(std::span<const LengthBucket> buckets) {
    TsvTable t({"bucket", "n", "min_len", "max_len", "median_jaccard", "median_spec", "mean_spec"});
    for (const auto& b : buckets) {
        t.add_row({std::to_string(b.index), std::to_string(b.n), std::to_string(b.min_len), std::to_string(b.max_len),
                   format_double(b.median_jaccard), format_double(b.median_spec), format_double(b.mean_spec)});
    }
    return t;
}

KeyValueDoc specificity_summary(const SpecificityReport& report) {
    KeyValueDoc doc;
    const auto& recs = report.records;
    doc.set("post_text", "title+content");
    doc.set("baseline_r", static_cast<std::uint64_t>(report.baseline_r));
    doc.set("n_candidate_pairs", static_cast<std::uint64_t>(report.n_candidate_pairs));
    doc.set("n_records", static_cast<std::uint64_t>(recs.size()));
    if (recs.empty()) return doc;

    std::vector<double> js, specs;
    std::map<Stratum, std::size_t> strata;
    std::size_t zero = 0;
    for (const auto& r : recs) {
        js.push_back(r.jaccard_actual);
        specs.push_back(r.lexical_spec);
        ++strata[r.stratum];
        if (r.jaccard_actual == 0.0) ++zero;
    }
    const double n = static_cast<double>(recs.size());
    doc.set("zero_overlap_fraction", static_cast<double>(zero) / n);
    doc.set("mean_jaccard", mean(js));
    doc.set("mean_lexical_spec", mean(specs));
    std::sort(js.begin(), js.end());
    std::sort(specs.begin(), specs.end());
    doc.set("median_jaccard", quantile_nearest_rank_sorted(js, 0.5));
    doc.set("median_lexical_spec", quantile_nearest_rank_sorted(specs, 0.5));
    for (Stratum s : {Stratum::High, Stratum::ZeroOverlap, Stratum::Negative, Stratum::Other}) {
        doc.set("stratum_" + std::string(to_string(s)), static_cast<std::uint64_t>(strata[s]));
    }

    doc.set("with_embeddings", report.with_embeddings);
    if (!report.with_embeddings) return doc;
    std::vector<double> lex, sem;
    std::size_t meaningful = 0, truncated = 0;
    for (const auto& r : recs) {
        if (r.embed_truncated) ++truncated;
        if (!r.semantic_spec) continue;
        lex.push_back(r.lexical_spec);
        sem.push_back(*r.semantic_spec);
        if (*r.semantic_spec >= report.semantic_threshold) ++meaningful;
    }
    doc.set("semantic_threshold", report.semantic_threshold);
    doc.set("n_semantic", static_cast<std::uint64_t>(sem.size()));
    doc.set("n_semantic_absent", static_cast<std::uint64_t>(recs.size() - sem.size()));
    doc.set("n_embed_truncated", static_cast<std::uint64_t>(truncated));
    if (!sem.empty()) {
        doc.set("mean_semantic_spec", mean(sem));
        doc.set("meaningful_semantic_fraction", static_cast<double>(meaningful) / static_cast<double>(sem.size()));
        try {
            doc.set("pearson_lexical_semantic", pearson(lex, sem));
        } catch (const Error&) {
            doc.set("pearson_lexical_semantic", "NA");
        }
    }
    return doc;
}

namespace {

ReplyGroupSummary summarize_group(std::vector<double> js, std::vector<double> specs) {
    ReplyGroupSummary g;
    g.n = js.size();
    if (js.empty()) return g;
    g.mean_jaccard = mean(js);
    g.zero_overlap_fraction =
        static_cast<double>(std::count(js.begin(), js.end(), 0.0)) / static_cast<double>(js.size());
    g.mean_spec = mean(specs);
    std::sort(specs.begin(), specs.end());
    g.median_spec = quantile_nearest_rank_sorted(specs, 0.5);
    g.p10_spec = quantile_nearest_rank_sorted(specs, 0.1);
    g.p90_spec = quantile_nearest_rank_sorted(specs, 0.9);
    return g;
}

}  // namespace

NestedReplyReport nested_reply_report(const Corpus& corpus, std::span<const SpecificityRecord> records) {
    std::vector<double> top_j, top_s, nested_j, nested_s;
    NestedReplyReport out;
    for (const auto& r : records) {
        const Comment* c = corpus.find_comment(r.comment_id);
        if (!r.depth || c == nullptr || !c->is_resolved()) {
            ++out.n_excluded;
            continue;
        }
        if (*r.depth == 0) {
            top_j.push_back(r.jaccard_actual);
            top_s.push_back(r.lexical_spec);
            continue;
        }
        const Comment* parent = c->parent_id ? corpus.find_comment(*c->parent_id) : nullptr;
        if (parent == nullptr) {
            ++out.n_excluded;
            continue;
        }
        const double j = jaccard(content_words(tokenize(c->content)), content_words(tokenize(parent->content)));
        nested_j.push_back(j);
        nested_s.push_back(j - r.baseline_jaccard_mean);
    }
    out.top_level = summarize_group(std::move(top_j), std::move(top_s));
    out.nested = summarize_group(std::move(nested_j), std::move(nested_s));
    return out;
}

KeyValueDoc nested_reply_document(const NestedReplyReport& report) {
    KeyValueDoc doc;
    auto put = [&doc](const std::string& prefix, const ReplyGroupSummary& g) {
        doc.set(prefix + "_n", static_cast<std::uint64_t>(g.n));
        if (g.n == 0) {
            doc.set(prefix + "_status", "empty");
            return;
        }
        doc.set(prefix + "_mean_jaccard", g.mean_jaccard);
        doc.set(prefix + "_zero_overlap_fraction", g.zero_overlap_fraction);
        doc.set(prefix + "_mean_spec", g.mean_spec);
        doc.set(prefix + "_median_spec", g.median_spec);
        doc.set(prefix + "_p10_spec", g.p10_spec);
        doc.set(prefix + "_p90_spec", g.p90_spec);
    };
    put("top_level", report.top_level);
    put("nested", report.nested);
    doc.set("n_excluded", static_cast<std::uint64_t>(report.n_excluded));
    return doc;
}

}  // namespace threadscope

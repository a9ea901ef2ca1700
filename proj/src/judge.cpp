#include "threadscope/judge.hpp"

#include "threadscope/corpus.hpp"
#include "threadscope/error.hpp"
#include "threadscope/providers.hpp"
#include "threadscope/stats.hpp"
#include "threadscope/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_map>

namespace threadscope {

std::string_view to_string(Category c) {
    switch (c) {
        case Category::GenericAffirmation: return "generic_affirmation";
        case Category::SelfPromotion: return "self_promotion";
        case Category::Spam: return "spam";
        case Category::OnTopic: return "on_topic";
        case Category::Substantive: return "substantive";
        case Category::OffTopic: return "off_topic";
    }
    return "off_topic";
}

std::optional<Category> parse_category(std::string_view text) {
    std::string norm;
    norm.reserve(text.size());
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    for (char ch : text.substr(b, e - b)) {
        if (ch == ' ' || ch == '-') {
            norm.push_back('_');
        } else {
            norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    for (Category c : kAllCategories) {
        if (norm == to_string(c)) return c;
    }
    return std::nullopt;
}

std::string_view to_string(VerdictError e) {
    switch (e) {
        case VerdictError::None: return "NONE";
        case VerdictError::NoObject: return "NO_OBJECT";
        case VerdictError::MissingField: return "MISSING_FIELD";
        case VerdictError::ScoreRange: return "SCORE_RANGE";
        case VerdictError::UnknownCategory: return "UNKNOWN_CATEGORY";
    }
    return "NONE";
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

JudgeSample build_sample(std::span<const SpecificityRecord> records, const SampleTargets& targets, std::uint64_t seed) {
    JudgeSample sample;
    sample.targets = targets;
    const std::pair<Stratum, std::size_t> plan[] = {
        {Stratum::High, targets.high}, {Stratum::ZeroOverlap, targets.zero_overlap}, {Stratum::Negative, targets.negative}};
    for (const auto& [stratum, target] : plan) {
        std::vector<const SpecificityRecord*> members;
        for (const auto& r : records) {
            if (r.stratum == stratum) members.push_back(&r);
        }
        std::sort(members.begin(), members.end(),
                  [](const auto* a, const auto* b) { return a->comment_id < b->comment_id; });
        sample.available[stratum] = members.size();
        Rng rng(derive_seed(seed, "judge-sample:" + std::string(to_string(stratum))));
        const auto picks = sample_indices(members.size(), target, rng);
        if (picks.size() < target) sample.shortfall[stratum] = target - picks.size();
        for (auto p : picks) sample.entries.push_back({members[p]->post_id, members[p]->comment_id, stratum});
    }
    std::sort(sample.entries.begin(), sample.entries.end(),
              [](const SampleEntry& a, const SampleEntry& b) { return a.comment_id < b.comment_id; });
    return sample;
}

TsvTable sample_tsv(const JudgeSample& sample) {
    TsvTable t({"post_id", "comment_id", "stratum"});
    for (const auto& e : sample.entries) {
        t.add_row({tsv_escape(e.post_id), tsv_escape(e.comment_id), std::string(to_string(e.stratum))});
    }
    return t;
}

JudgeSample parse_sample_tsv(const TsvTable& table) {
    const std::size_t cp = table.column("post_id"), cc = table.column("comment_id"), cs = table.column("stratum");
    JudgeSample sample;
    for (const auto& row : table.rows()) {
        const auto s = parse_stratum(row[cs]);
        if (!s) throw Error(ErrorKind::Schema, "unknown stratum '" + row[cs] + "'");
        sample.entries.push_back({row[cp], row[cc], *s});
        ++sample.available[*s];
    }
    return sample;
}

// ---------------------------------------------------------------------------
// Prompt
// ---------------------------------------------------------------------------

std::string render_prompt(const Post& post, const Comment& comment) {
    std::string p;
    p += "You are rating a comment written in reply to a post on a social platform.\n\n";
    p += "POST TITLE:\n" + post.title + "\n\n";
    if (!post.content.empty()) p += "POST BODY:\n" + post.content + "\n\n";
    p += "COMMENT:\n" + comment.content + "\n\n";
    p +=
        "Rate the comment.\n"
        "1. responsiveness (integer 1-5): how specifically does the comment address this post's content?\n"
        "   1 = ignores the post; 3 = addresses its general subject; 5 = engages directly with its specific claims "
        "or details.\n"
        "2. information (integer 1-5): how much new information does the comment add?\n"
        "   1 = nothing new; 3 = some new information or perspective; 5 = substantial new information, evidence or "
        "argument.\n"
        "3. category, exactly one of:\n"
        "   generic_affirmation: praise or agreement that would fit under any post\n"
        "   self_promotion: a thin veneer of relevance used to redirect attention to the commenter's own project\n"
        "   spam: follower bait, manipulation or repeated promotional copy\n"
        "   on_topic: aware of the post's subject but adds little new content\n"
        "   substantive: engages with specific claims in the post and adds new information\n"
        "   off_topic: coherent text with no relationship to the post\n\n"
        "Answer with one flat JSON object and nothing else, using the keys \"responsiveness\", \"information\" and "
        "\"category\".\n";
    return p;
}

// ---------------------------------------------------------------------------
// Verdict parsing
// ---------------------------------------------------------------------------

namespace {

// End (exclusive) of the balanced {...} starting at `begin`, honouring JSON strings.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t begin) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = begin; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::nullopt;
}

struct ScoreRead {
    std::optional<int> value;
    VerdictError error = VerdictError::None;
};

ScoreRead read_score(const nlohmann::json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) return {std::nullopt, VerdictError::MissingField};
    double v = 0.0;
    if (it->is_number()) {
        v = it->get<double>();
    } else if (it->is_string()) {
        const auto& s = it->get_ref<const std::string&>();
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) return {std::nullopt, VerdictError::MissingField};
    } else {
        return {std::nullopt, VerdictError::MissingField};
    }
    if (v != std::floor(v) || v < 1.0 || v > 5.0) return {std::nullopt, VerdictError::ScoreRange};
    return {static_cast<int>(v), VerdictError::None};
}

}  // namespace

VerdictParse parse_verdict(std::string_view raw) {
    VerdictParse out;
    std::optional<nlohmann::json> obj;
    for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
        const auto end = balanced_end(raw, pos);
        if (!end) continue;
        auto j = nlohmann::json::parse(raw.substr(pos, *end - pos), nullptr, false);
        if (!j.is_discarded() && j.is_object()) {
            obj = std::move(j);
            break;
        }
    }
    if (!obj) {
        out.error = VerdictError::NoObject;
        out.message = "no JSON object found";
        return out;
    }
    const auto resp = read_score(*obj, "responsiveness");
    const auto info = read_score(*obj, "information");
    for (const auto& [read, name] : {std::pair{&resp, "responsiveness"}, std::pair{&info, "information"}}) {
        if (read->error != VerdictError::None) {
            out.error = read->error;
            out.message = std::string(name) + (read->error == VerdictError::ScoreRange ? " outside 1-5" : " missing");
            return out;
        }
    }
    const auto cat = obj->find("category");
    if (cat == obj->end() || !cat->is_string()) {
        out.error = VerdictError::MissingField;
        out.message = "category missing";
        return out;
    }
    const auto parsed = parse_category(cat->get_ref<const std::string&>());
    if (!parsed) {
        out.error = VerdictError::UnknownCategory;
        out.message = "unknown category '" + cat->get<std::string>() + "'";
        return out;
    }
    out.verdict = ParsedVerdict{*resp.value, *info.value, *parsed};
    return out;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

namespace {

struct Outcome {
    std::optional<JudgeVerdict> verdict;
    std::optional<JudgeFailure> failure;
};

Outcome judge_one(const Corpus& corpus, const SampleEntry& e, JudgeClient& client) {
    Outcome o;
    const Post* post = corpus.find_post(e.post_id);
    const Comment* comment = corpus.find_comment(e.comment_id);
    if (post == nullptr || comment == nullptr) {
        o.failure = JudgeFailure{e.comment_id, client.model_id(), "MISSING_RECORD", ""};
        return o;
    }
    const auto raw = client.complete_judgement(render_prompt(*post, *comment));
    if (!raw) {
        o.failure = JudgeFailure{e.comment_id, client.model_id(), "ABSENT", ""};
        return o;
    }
    const auto parsed = parse_verdict(*raw);
    if (!parsed.verdict) {
        o.failure = JudgeFailure{e.comment_id, client.model_id(), std::string(to_string(parsed.error)), *raw};
        return o;
    }
    o.verdict = JudgeVerdict{e.comment_id, parsed.verdict->responsiveness, parsed.verdict->information,
                             parsed.verdict->category, client.model_id()};
    return o;
}

void judge_all(const Corpus& corpus, std::span<const SampleEntry> entries, JudgeClient& client,
               std::vector<JudgeVerdict>& verdicts, std::vector<JudgeFailure>& failures) {
    std::vector<Outcome> outcomes(entries.size());
    parallel_for(entries.size(), client.config().max_in_flight,
                 [&](std::size_t i) { outcomes[i] = judge_one(corpus, entries[i], client); });
    for (auto& o : outcomes) {
        if (o.verdict) verdicts.push_back(std::move(*o.verdict));
        if (o.failure) failures.push_back(std::move(*o.failure));
    }
}

}  // namespace

JudgeRunResult run_judgement(const Corpus& corpus, const JudgeSample& sample, const JudgeRunOptions& options) {
    if (options.primary == nullptr) throw Error(ErrorKind::InvalidArgument, "run_judgement: no primary judge");
    JudgeRunResult result;
    judge_all(corpus, sample.entries, *options.primary, result.verdicts, result.failures);
    if (options.calibration != nullptr) {
        const std::size_t n = std::min(options.calibration_size, sample.entries.size());
        judge_all(corpus, std::span<const SampleEntry>(sample.entries.data(), n), *options.calibration,
                  result.calibration_verdicts, result.calibration_failures);
    }
    return result;
}

TsvTable verdicts_tsv(std::span<const JudgeVerdict> verdicts) {
    TsvTable t({"comment_id", "responsiveness", "information", "category", "judge_model"});
    for (const auto& v : verdicts) {
        t.add_row({tsv_escape(v.comment_id), std::to_string(v.responsiveness), std::to_string(v.information),
                   std::string(to_string(v.category)), tsv_escape(v.judge_model)});
    }
    return t;
}

std::vector<JudgeVerdict> parse_verdicts_tsv(const TsvTable& table) {
    const std::size_t cc = table.column("comment_id"), cr = table.column("responsiveness"),
                      ci = table.column("information"), ck = table.column("category"), cm = table.column("judge_model");
    std::vector<JudgeVerdict> out;
    for (const auto& row : table.rows()) {
        const auto cat = parse_category(row[ck]);
        if (!cat) throw Error(ErrorKind::Schema, "unknown category '" + row[ck] + "'");
        JudgeVerdict v;
        v.comment_id = row[cc];
        v.responsiveness = std::stoi(row[cr]);
        v.information = std::stoi(row[ci]);
        if (v.responsiveness < 1 || v.responsiveness > 5 || v.information < 1 || v.information > 5) {
            throw Error(ErrorKind::Schema, "score outside 1-5 for " + v.comment_id);
        }
        v.category = *cat;
        v.judge_model = row[cm];
        out.push_back(std::move(v));
    }
    return out;
}

TsvTable failures_tsv(std::span<const JudgeFailure> failures) {
    TsvTable t({"comment_id", "judge_model", "kind", "raw"});
    for (const auto& f : failures) {
        t.add_row({tsv_escape(f.comment_id), tsv_escape(f.judge_model), f.kind, tsv_escape(f.raw)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

namespace {

std::optional<double> try_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    try {
        return spearman(x, y);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Degenerate || e.kind() == ErrorKind::InvalidArgument) return std::nullopt;
        throw;
    }
}

}  // namespace

AgreementStats agreement_stats(std::span<const JudgeVerdict> a, std::span<const JudgeVerdict> b) {
    std::unordered_map<std::string_view, const JudgeVerdict*> by_id;
    for (const auto& v : b) by_id.emplace(v.comment_id, &v);
    std::vector<std::string> ca, cb;
    std::vector<double> ra, rb, ia, ib;
    for (const auto& v : a) {
        const auto it = by_id.find(v.comment_id);
        if (it == by_id.end()) continue;
        ca.emplace_back(to_string(v.category));
        cb.emplace_back(to_string(it->second->category));
        ra.push_back(v.responsiveness);
        rb.push_back(it->second->responsiveness);
        ia.push_back(v.information);
        ib.push_back(it->second->information);
    }
    if (ca.size() < 2) {
        throw Error(ErrorKind::InvalidArgument,
                    "agreement_stats: need at least 2 shared items, got " + std::to_string(ca.size()));
    }
    AgreementStats s;
    s.n_shared = ca.size();
    s.exact_match = exact_match(ca, cb);
    try {
        s.kappa = cohen_kappa(ca, cb);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Degenerate) throw;
    }
    s.spearman_responsiveness = try_spearman(ra, rb);
    s.spearman_information = try_spearman(ia, ib);
    return s;
}

namespace {

void set_opt(KeyValueDoc& doc, const std::string& key, const std::optional<double>& v) {
    if (v) {
        doc.set(key, *v);
    } else {
        doc.set(key, "NA");
    }
}

}  // namespace

KeyValueDoc agreement_document(const AgreementStats& s) {
    KeyValueDoc doc;
    doc.set("n_shared", static_cast<std::uint64_t>(s.n_shared));
    set_opt(doc, "kappa", s.kappa);
    doc.set("exact_match", s.exact_match);
    set_opt(doc, "spearman_responsiveness", s.spearman_responsiveness);
    set_opt(doc, "spearman_information", s.spearman_information);
    return doc;
}

MetricCorrelations metric_correlations(std::span<const JudgeVerdict> verdicts,
                                       std::span<const SpecificityRecord> records) {
    std::unordered_map<std::string_view, const SpecificityRecord*> by_id;
    for (const auto& r : records) by_id.emplace(r.comment_id, &r);
    MetricCorrelations m;
    std::vector<double> resp, jac, resp_sem, sem, all_info;
    for (const auto& v : verdicts) {
        const auto it = by_id.find(v.comment_id);
        if (it == by_id.end()) {
            m.orphans.push_back(v.comment_id);
            continue;
        }
        const SpecificityRecord& r = *it->second;
        resp.push_back(v.responsiveness);
        jac.push_back(r.jaccard_actual);
        if (r.semantic_spec) {
            resp_sem.push_back(v.responsiveness);
            sem.push_back(*r.semantic_spec);
        }
        all_info.push_back(v.information);
        ++m.category_counts[v.category];
        auto& s = m.by_stratum[r.stratum];
        ++s.n;
        s.mean_responsiveness += v.responsiveness;
        s.mean_information += v.information;
        ++s.category_counts[v.category];
    }
    if (resp.empty()) throw Error(ErrorKind::EmptyInput, "metric_correlations: no verdict joins a record");
    m.n_joined = resp.size();
    m.n_semantic = sem.size();
    m.mean_responsiveness = mean(resp);
    m.mean_information = mean(all_info);
    for (auto& [_, s] : m.by_stratum) {
        s.mean_responsiveness /= static_cast<double>(s.n);
        s.mean_information /= static_cast<double>(s.n);
    }
    m.rho_resp_jaccard = try_spearman(resp, jac);
    m.rho_resp_semantic = try_spearman(resp_sem, sem);
    return m;
}

KeyValueDoc correlation_document(const MetricCorrelations& m) {
    KeyValueDoc doc;
    doc.set("n_joined", static_cast<std::uint64_t>(m.n_joined));
    doc.set("n_orphans", static_cast<std::uint64_t>(m.orphans.size()));
    set_opt(doc, "rho_resp_jaccard", m.rho_resp_jaccard);
    doc.set("n_semantic", static_cast<std::uint64_t>(m.n_semantic));
    set_opt(doc, "rho_resp_semantic", m.rho_resp_semantic);
    doc.set("mean_responsiveness", m.mean_responsiveness);
    doc.set("mean_information", m.mean_information);
    for (Category c : kAllCategories) {
        const auto it = m.category_counts.find(c);
        const std::size_t n = it == m.category_counts.end() ? 0 : it->second;
        doc.set("fraction_" + std::string(to_string(c)), static_cast<double>(n) / static_cast<double>(m.n_joined));
    }
    for (const auto& [stratum, s] : m.by_stratum) {
        const std::string prefix = "stratum_" + std::string(to_string(stratum));
        doc.set(prefix + "_n", static_cast<std::uint64_t>(s.n));
        doc.set(prefix + "_mean_responsiveness", s.mean_responsiveness);
        doc.set(prefix + "_mean_information", s.mean_information);
    }
    return doc;
}

TsvTable category_by_stratum_tsv(const MetricCorrelations& m) {
    std::vector<std::string> header{"stratum", "n"};
    for (Category c : kAllCategories) header.emplace_back(std::string(to_string(c)) + "_count");
    for (Category c : kAllCategories) header.emplace_back(std::string(to_string(c)) + "_fraction");
    TsvTable t(std::move(header));
    for (const auto& [stratum, s] : m.by_stratum) {
        std::vector<std::string> row{std::string(to_string(stratum)), std::to_string(s.n)};
        for (Category c : kAllCategories) {
            const auto it = s.category_counts.find(c);
            row.push_back(std::to_string(it == s.category_counts.end() ? 0 : it->second));
        }
        for (Category c : kAllCategories) {
            const auto it = s.category_counts.find(c);
            const std::size_t n = it == s.category_counts.end() ? 0 : it->second;
            row.push_back(format_double(static_cast<double>(n) / static_cast<double>(s.n)));
        }
        t.add_row(std::move(row));
    }
    return t;
}

}  // namespace threadscope

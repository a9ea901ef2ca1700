#include "threadscope/corpus.hpp"

#include "threadscope/error.hpp"
#include "threadscope/stats.hpp"
#include "threadscope/util.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <future>
#include <set>

namespace threadscope {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kPostFields = {"id", "title", "content", "submolt", "author_id", "created_at"};
const std::vector<std::string> kCommentFields = {"id", "post_id", "parent_id", "author_id", "created_at", "content"};
const std::vector<std::string> kAgentFields = {"id", "name", "description"};

const std::vector<std::string> kRequiredPost = {"id", "title", "submolt", "author_id", "created_at"};
const std::vector<std::string> kRequiredComment = {"id", "post_id", "author_id", "created_at", "content"};
const std::vector<std::string> kRequiredAgent = {"id", "name"};

std::map<std::string, std::string> identity(const std::vector<std::string>& fields) {
    std::map<std::string, std::string> m;
    for (const auto& f : fields) m[f] = f;
    return m;
}

const json* lookup(const json& obj, const std::map<std::string, std::string>& fields, const std::string& canonical) {
    const auto it = fields.find(canonical);
    if (it == fields.end() || it->second.empty()) return nullptr;
    const json* cur = &obj;
    for (const auto& part : split(it->second, '.')) {
        if (!cur->is_object()) return nullptr;
        const auto f = cur->find(part);
        if (f == cur->end()) return nullptr;
        cur = &*f;
    }
    return cur->is_null() ? nullptr : cur;
}

// Scalar field as text; numbers are rendered so integer ids survive.
std::optional<std::string> text_field(const json& obj, const std::map<std::string, std::string>& fields,
                                      const std::string& canonical) {
    const json* v = lookup(obj, fields, canonical);
    if (!v) return std::nullopt;
    if (v->is_string()) return v->get<std::string>();
    if (v->is_number_integer()) return std::to_string(v->get<std::int64_t>());
    if (v->is_number_unsigned()) return std::to_string(v->get<std::uint64_t>());
    if (v->is_number_float()) return format_double(v->get<double>());
    if (v->is_boolean()) return v->get<bool>() ? "true" : "false";
    return std::nullopt;
}

std::optional<Timestamp> time_field(const json& obj, const std::map<std::string, std::string>& fields,
                                    const std::string& canonical) {
    const json* v = lookup(obj, fields, canonical);
    if (!v) return std::nullopt;
    if (v->is_string()) return parse_timestamp(v->get<std::string>());
    if (v->is_number()) {
        // Epoch seconds.
        return Timestamp{static_cast<std::int64_t>(v->get<double>() * 1'000'000.0)};
    }
    return std::nullopt;
}

std::optional<Post> parse_post(const json& j, const SnapshotSchema& s) {
    auto id = text_field(j, s.post_fields, "id");
    auto author = text_field(j, s.post_fields, "author_id");
    auto ts = time_field(j, s.post_fields, "created_at");
    if (!id || id->empty() || !author || !ts) return std::nullopt;
    Post p;
    p.id = std::move(*id);
    p.author_id = std::move(*author);
    p.created_at = *ts;
    p.title = text_field(j, s.post_fields, "title").value_or("");
    p.content = text_field(j, s.post_fields, "content").value_or("");
    p.submolt = text_field(j, s.post_fields, "submolt").value_or("");
    return p;
}

std::optional<Comment> parse_comment(const json& j, const SnapshotSchema& s) {
    auto id = text_field(j, s.comment_fields, "id");
    auto post = text_field(j, s.comment_fields, "post_id");
    auto author = text_field(j, s.comment_fields, "author_id");
    auto ts = time_field(j, s.comment_fields, "created_at");
    auto content = text_field(j, s.comment_fields, "content");
    if (!id || id->empty() || !post || post->empty() || !author || !ts || !content) return std::nullopt;
    Comment c;
    c.id = std::move(*id);
    c.post_id = std::move(*post);
    c.author_id = std::move(*author);
    c.created_at = *ts;
    c.content = std::move(*content);
    if (auto parent = text_field(j, s.comment_fields, "parent_id"); parent && !parent->empty()) {
        c.parent_id = std::move(*parent);
    }
    return c;
}

std::optional<AgentProfile> parse_agent(const json& j, const SnapshotSchema& s) {
    auto id = text_field(j, s.agent_fields, "id");
    if (!id || id->empty()) return std::nullopt;
    AgentProfile a;
    a.id = std::move(*id);
    a.name = text_field(j, s.agent_fields, "name").value_or("");
    a.description = text_field(j, s.agent_fields, "description").value_or("");
    return a;
}

void load_into(const fs::path& file, RecordKind kind, const SnapshotSchema& schema, Snapshot& out) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot read '{}'", file.string()));
    LoadCounters& counters = kind == RecordKind::Post      ? out.post_counters
                             : kind == RecordKind::Comment ? out.comment_counters
                                                           : out.agent_counters;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++counters.lines;
        const json j = json::parse(line, nullptr, false);
        bool ok = false;
        if (!j.is_discarded() && j.is_object()) {
            switch (kind) {
                case RecordKind::Post:
                    if (auto p = parse_post(j, schema)) {
                        out.posts.push_back(std::move(*p));
                        ok = true;
                    }
                    break;
                case RecordKind::Comment:
                    if (auto c = parse_comment(j, schema)) {
                        out.comments.push_back(std::move(*c));
                        ok = true;
                    }
                    break;
                case RecordKind::Agent:
                    if (auto a = parse_agent(j, schema)) {
                        out.agents.push_back(std::move(*a));
                        ok = true;
                    }
                    break;
            }
        }
        if (ok) {
            ++counters.loaded;
        } else {
            ++counters.skipped;
        }
    }
    if (in.bad()) throw Error(ErrorKind::Io, fmt::format("error reading '{}'", file.string()));
}

void check_required(const std::map<std::string, std::string>& fields, const std::vector<std::string>& required,
                    std::string_view kind) {
    for (const auto& f : required) {
        const auto it = fields.find(f);
        if (it == fields.end() || it->second.empty()) {
            throw Error(ErrorKind::Schema, fmt::format("schema for {} is missing required field '{}'", kind, f));
        }
    }
}

}  // namespace

SnapshotSchema SnapshotSchema::canonical() {
    SnapshotSchema s;
    s.post_fields = identity(kPostFields);
    s.comment_fields = identity(kCommentFields);
    s.agent_fields = identity(kAgentFields);
    return s;
}

SnapshotSchema SnapshotSchema::from_json_file(const fs::path& path) {
    const json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(ErrorKind::Schema, fmt::format("'{}' is not a JSON object", path.string()));
    }
    SnapshotSchema s = canonical();
    auto apply = [&](const char* key, std::map<std::string, std::string>& fields) {
        const auto it = j.find(key);
        if (it == j.end()) return;
        if (!it->is_object()) throw Error(ErrorKind::Schema, fmt::format("schema section '{}' must be an object", key));
        for (const auto& [canonical_name, source] : it->items()) {
            if (!fields.count(canonical_name)) {
                throw Error(ErrorKind::Schema, fmt::format("unknown canonical field '{}.{}'", key, canonical_name));
            }
            fields[canonical_name] = source.is_string() ? source.get<std::string>() : std::string();
        }
    };
    apply("posts", s.post_fields);
    apply("comments", s.comment_fields);
    apply("agents", s.agent_fields);
    if (const auto files = j.find("files"); files != j.end() && files->is_object()) {
        s.posts_file = files->value("posts", s.posts_file);
        s.comments_file = files->value("comments", s.comments_file);
        s.agents_file = files->value("agents", s.agents_file);
    }
    s.validate();
    return s;
}

void SnapshotSchema::validate() const {
    check_required(post_fields, kRequiredPost, "posts");
    check_required(comment_fields, kRequiredComment, "comments");
    check_required(agent_fields, kRequiredAgent, "agents");
}

Snapshot load_records_file(const fs::path& file, RecordKind kind, const SnapshotSchema& schema) {
    schema.validate();
    Snapshot snap;
    snap.source = file.string();
    load_into(file, kind, schema, snap);
    return snap;
}

Snapshot load_snapshot(const fs::path& path, const std::optional<SnapshotSchema>& schema_arg) {
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) {
        const SnapshotSchema schema = schema_arg.value_or(SnapshotSchema::canonical());
        const auto name = path.filename().string();
        RecordKind kind;
        if (name == schema.comments_file || name.find("comment") != std::string::npos) {
            kind = RecordKind::Comment;
        } else if (name == schema.posts_file || name.find("post") != std::string::npos) {
            kind = RecordKind::Post;
        } else if (name == schema.agents_file || name.find("agent") != std::string::npos) {
            kind = RecordKind::Agent;
        } else {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("cannot tell the record kind of '{}' from its name", path.string()));
        }
        return load_records_file(path, kind, schema);
    }
    if (!fs::is_directory(path, ec)) {
        throw Error(ErrorKind::Io, fmt::format("snapshot '{}' does not exist", path.string()));
    }
    SnapshotSchema schema = schema_arg ? *schema_arg
                            : fs::exists(path / "schema.json") ? SnapshotSchema::from_json_file(path / "schema.json")
                                                               : SnapshotSchema::canonical();
    schema.validate();

    // One loader per file; files are independent.
    auto load_one = [&](const std::string& name, RecordKind kind) {
        Snapshot part;
        const fs::path file = path / name;
        if (fs::exists(file)) load_into(file, kind, schema, part);
        return part;
    };
    auto posts = std::async(std::launch::async, load_one, schema.posts_file, RecordKind::Post);
    auto comments = std::async(std::launch::async, load_one, schema.comments_file, RecordKind::Comment);
    auto agents = std::async(std::launch::async, load_one, schema.agents_file, RecordKind::Agent);

    Snapshot snap;
    snap.source = path.string();
    Snapshot p = posts.get();
    Snapshot c = comments.get();
    Snapshot a = agents.get();
    snap.posts = std::move(p.posts);
    snap.post_counters = p.post_counters;
    snap.comments = std::move(c.comments);
    snap.comment_counters = c.comment_counters;
    snap.agents = std::move(a.agents);
    snap.agent_counters = a.agent_counters;
    return snap;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Record>
std::vector<Record> dedup_kind(std::span<const Snapshot> snapshots, std::vector<Record> Snapshot::*member,
                               std::size_t& collisions) {
    std::vector<Record> out;
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& snap : snapshots) {
        for (const auto& rec : snap.*member) {
            if (seen.emplace(rec.id, out.size()).second) {
                out.push_back(rec);
            } else {
                ++collisions;
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Record& a, const Record& b) { return a.id < b.id; });
    return out;
}

}  // namespace

Corpus merge_dedup(std::span<const Snapshot> snapshots) {
    Corpus corpus;
    MergeReport& report = corpus.report_;
    corpus.posts_ = dedup_kind(snapshots, &Snapshot::posts, report.post_collisions);
    corpus.comments_ = dedup_kind(snapshots, &Snapshot::comments, report.comment_collisions);
    corpus.agents_ = dedup_kind(snapshots, &Snapshot::agents, report.agent_collisions);
    for (const auto& s : snapshots) {
        report.sources.push_back(s.source);
        report.skipped_lines += s.post_counters.skipped + s.comment_counters.skipped + s.agent_counters.skipped;
    }
    // Depth is derived state; merged input always starts unresolved.
    for (auto& c : corpus.comments_) c.depth.reset();
    corpus.build_indexes();
    return corpus;
}

Corpus build_corpus(std::vector<Post> posts, std::vector<Comment> comments, std::vector<AgentProfile> agents,
                    MergeReport report) {
    Snapshot snap;
    snap.posts = std::move(posts);
    snap.comments = std::move(comments);
    snap.agents = std::move(agents);
    Corpus corpus = merge_dedup(std::span<const Snapshot>(&snap, 1));
    report.post_collisions += corpus.report_.post_collisions;
    report.comment_collisions += corpus.report_.comment_collisions;
    report.agent_collisions += corpus.report_.agent_collisions;
    corpus.report_ = std::move(report);
    return resolve_depths(std::move(corpus));
}

void Corpus::build_indexes() {
    post_by_id_.clear();
    comment_by_id_.clear();
    agent_by_id_.clear();
    post_by_id_.reserve(posts_.size());
    comment_by_id_.reserve(comments_.size());
    agent_by_id_.reserve(agents_.size());
    for (std::size_t i = 0; i < posts_.size(); ++i) post_by_id_.emplace(posts_[i].id, i);
    for (std::size_t i = 0; i < comments_.size(); ++i) comment_by_id_.emplace(comments_[i].id, i);
    for (std::size_t i = 0; i < agents_.size(); ++i) agent_by_id_.emplace(agents_[i].id, i);

    by_post_.assign(posts_.size(), {});
    orphans_by_post_.clear();
    by_agent_.clear();
    for (std::size_t i = 0; i < comments_.size(); ++i) {
        const auto& c = comments_[i];
        if (const auto it = post_by_id_.find(c.post_id); it != post_by_id_.end()) {
            by_post_[it->second].push_back(i);
        } else {
            orphans_by_post_[c.post_id].push_back(i);
        }
        by_agent_[c.author_id].push_back(i);
    }
    // Comment ids are unique, so (created_at, id) is a total order.
    auto by_time = [this](std::size_t a, std::size_t b) {
        const auto& x = comments_[a];
        const auto& y = comments_[b];
        if (x.created_at != y.created_at) return x.created_at < y.created_at;
        return x.id < y.id;
    };
    for (auto& v : by_post_) std::sort(v.begin(), v.end(), by_time);
    for (auto& [_, v] : orphans_by_post_) std::sort(v.begin(), v.end(), by_time);
    for (auto& [_, v] : by_agent_) std::sort(v.begin(), v.end(), by_time);
}

Corpus resolve_depths(Corpus corpus) {
    auto& comments = corpus.comments_;
    std::vector<std::vector<std::size_t>> children(comments.size());
    std::deque<std::size_t> frontier;
    for (std::size_t i = 0; i < comments.size(); ++i) {
        auto& c = comments[i];
        c.depth.reset();
        if (!c.parent_id) {
            c.depth = 0;
            frontier.push_back(i);
        } else if (const auto it = corpus.comment_by_id_.find(*c.parent_id); it != corpus.comment_by_id_.end()) {
            children[it->second].push_back(i);
        }
    }
    // Each pass settles one more level; anything never reached is left
    // unresolved (missing ancestor or a cycle).
    while (!frontier.empty()) {
        const std::size_t cur = frontier.front();
        frontier.pop_front();
        for (std::size_t child : children[cur]) {
            if (comments[child].depth) continue;
            comments[child].depth = *comments[cur].depth + 1;
            frontier.push_back(child);
        }
    }
    corpus.depths_resolved_ = true;
    return corpus;
}

// ---------------------------------------------------------------------------

const Post* Corpus::find_post(std::string_view id) const {
    const auto it = post_by_id_.find(std::string(id));
    return it == post_by_id_.end() ? nullptr : &posts_[it->second];
}

const Comment* Corpus::find_comment(std::string_view id) const {
    const auto it = comment_by_id_.find(std::string(id));
    return it == comment_by_id_.end() ? nullptr : &comments_[it->second];
}

const AgentProfile* Corpus::find_agent(std::string_view id) const {
    const auto it = agent_by_id_.find(std::string(id));
    return it == agent_by_id_.end() ? nullptr : &agents_[it->second];
}

std::optional<std::size_t> Corpus::post_index(std::string_view id) const {
    const auto it = post_by_id_.find(std::string(id));
    if (it == post_by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Corpus::comment_index(std::string_view id) const {
    const auto it = comment_by_id_.find(std::string(id));
    if (it == comment_by_id_.end()) return std::nullopt;
    return it->second;
}

std::span<const std::size_t> Corpus::comments_of_post(std::size_t post_idx) const { return by_post_.at(post_idx); }

bool operator==(const Corpus& a, const Corpus& b) {
    return a.posts_ == b.posts_ && a.comments_ == b.comments_ && a.agents_ == b.agents_ &&
           a.by_post_ == b.by_post_ && a.by_agent_ == b.by_agent_ && a.depths_resolved_ == b.depths_resolved_;
}

Snapshot Corpus::to_snapshot() const {
    Snapshot s;
    s.source = "corpus";
    s.posts = posts_;
    s.comments = comments_;
    s.agents = agents_;
    s.post_counters = {posts_.size(), posts_.size(), 0};
    s.comment_counters = {comments_.size(), comments_.size(), 0};
    s.agent_counters = {agents_.size(), agents_.size(), 0};
    return s;
}

// ---------------------------------------------------------------------------

CorpusStats corpus_stats(const Corpus& corpus) {
    if (corpus.posts().empty() && corpus.comments().empty()) {
        throw Error(ErrorKind::EmptyInput, "corpus has no posts and no comments");
    }
    if (!corpus.depths_resolved()) {
        throw Error(ErrorKind::InvalidArgument, "corpus_stats requires resolved depths");
    }
    CorpusStats s;
    s.n_posts = corpus.posts().size();
    s.n_comments = corpus.comments().size();
    s.n_agents = corpus.agents().size();

    std::size_t top_level = 0;
    std::map<std::pair<std::string_view, std::string_view>, std::size_t> pair_counts;
    std::map<std::string_view, std::size_t> per_agent;
    for (const auto& c : corpus.comments()) {
        const auto ts = c.created_at;
        if (!s.first_timestamp || ts < *s.first_timestamp) s.first_timestamp = ts;
        if (!s.last_timestamp || ts > *s.last_timestamp) s.last_timestamp = ts;
        if (!c.depth) {
            ++s.n_unresolved_comments;
            continue;
        }
        ++s.n_resolved_comments;
        if (*c.depth == 0) ++top_level;
        ++pair_counts[{c.author_id, c.post_id}];
        ++per_agent[c.author_id];
    }
    for (const auto& p : corpus.posts()) {
        if (!s.first_timestamp || p.created_at < *s.first_timestamp) s.first_timestamp = p.created_at;
        if (!s.last_timestamp || p.created_at > *s.last_timestamp) s.last_timestamp = p.created_at;
    }
    s.n_comment_authors = per_agent.size();
    if (s.n_resolved_comments > 0) {
        s.pct_top_level = static_cast<double>(top_level) / static_cast<double>(s.n_resolved_comments);
    }
    if (!pair_counts.empty()) {
        std::size_t repeat = 0;
        for (const auto& [_, n] : pair_counts) {
            if (n > 1) ++repeat;
            s.max_comments_same_agent_post = std::max(s.max_comments_same_agent_post, n);
        }
        s.pct_repeat_pairs = static_cast<double>(repeat) / static_cast<double>(pair_counts.size());
    }
    if (!corpus.posts().empty()) {
        std::vector<double> per_post;
        per_post.reserve(corpus.posts().size());
        for (std::size_t i = 0; i < corpus.posts().size(); ++i) {
            std::size_t n = 0;
            for (std::size_t ci : corpus.comments_of_post(i)) {
                if (corpus.comments()[ci].depth) ++n;
            }
            per_post.push_back(static_cast<double>(n));
        }
        std::sort(per_post.begin(), per_post.end());
        s.median_comments_per_post = static_cast<std::size_t>(quantile_nearest_rank_sorted(per_post, 0.5));
        s.p95_comments_per_post = static_cast<std::size_t>(quantile_nearest_rank_sorted(per_post, 0.95));
        double total = 0;
        for (double v : per_post) total += v;
        s.mean_comments_per_post = total / static_cast<double>(per_post.size());
    }
    if (!per_agent.empty()) {
        std::vector<double> counts;
        counts.reserve(per_agent.size());
        for (const auto& [_, n] : per_agent) counts.push_back(static_cast<double>(n));
        std::sort(counts.begin(), counts.end());
        s.median_comments_per_agent = static_cast<std::size_t>(quantile_nearest_rank_sorted(counts, 0.5));
    }
    return s;
}

KeyValueDoc stats_document(const CorpusStats& s, const MergeReport& r) {
    KeyValueDoc doc;
    doc.set("n_posts", std::uint64_t{s.n_posts});
    doc.set("n_comments", std::uint64_t{s.n_comments});
    doc.set("n_resolved_comments", std::uint64_t{s.n_resolved_comments});
    doc.set("n_unresolved_comments", std::uint64_t{s.n_unresolved_comments});
    doc.set("n_agents", std::uint64_t{s.n_agents});
    doc.set("n_comment_authors", std::uint64_t{s.n_comment_authors});
    doc.set("pct_top_level", s.pct_top_level);
    doc.set("median_comments_per_post", std::uint64_t{s.median_comments_per_post});
    doc.set("p95_comments_per_post", std::uint64_t{s.p95_comments_per_post});
    doc.set("mean_comments_per_post", s.mean_comments_per_post);
    doc.set("median_comments_per_agent", std::uint64_t{s.median_comments_per_agent});
    doc.set("pct_repeat_pairs", s.pct_repeat_pairs);
    doc.set("max_comments_same_agent_post", std::uint64_t{s.max_comments_same_agent_post});
    doc.set("date_min", s.first_timestamp ? format_timestamp(*s.first_timestamp) : std::string("NA"));
    doc.set("date_max", s.last_timestamp ? format_timestamp(*s.last_timestamp) : std::string("NA"));
    doc.set("post_collisions", std::uint64_t{r.post_collisions});
    doc.set("comment_collisions", std::uint64_t{r.comment_collisions});
    doc.set("agent_collisions", std::uint64_t{r.agent_collisions});
    doc.set("skipped_lines", std::uint64_t{r.skipped_lines});
    doc.set("collision_policy", "first-wins");
    return doc;
}

std::string post_text(const Post& p) {
    if (p.content.empty()) return p.title;
    if (p.title.empty()) return p.content;
    return p.title + "\n" + p.content;
}

}  // namespace threadscope

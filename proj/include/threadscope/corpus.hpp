#pragma once
// Corpus ingestion: snapshot loading, first-wins deduplication, reply-depth
// resolution and summary statistics.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace threadscope {

class KeyValueDoc;

/// UTC instant with microsecond resolution.
struct Timestamp {
    std::int64_t micros = 0;  // since 1970-01-01T00:00:00Z

    friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// Accepts RFC 3339 (`T` or space separator, optional fraction, `Z` or
/// +hh:mm offset). Returns nullopt on anything else.
std::optional<Timestamp> parse_timestamp(std::string_view text);
/// `YYYY-MM-DDTHH:MM:SS[.ffffff]Z`; the fraction is printed only when non-zero.
std::string format_timestamp(Timestamp t);

struct Post {
    std::string id;
    std::string title;
    std::string content;
    std::string submolt;
    std::string author_id;
    Timestamp created_at;

    friend bool operator==(const Post&, const Post&) = default;
};

struct Comment {
    std::string id;
    std::string post_id;
    std::optional<std::string> parent_id;  // present iff nested reply
    std::string author_id;
    Timestamp created_at;
    std::string content;
    std::optional<std::uint32_t> depth;  // nullopt = unresolved

    bool is_resolved() const { return depth.has_value(); }
    friend bool operator==(const Comment&, const Comment&) = default;
};

struct AgentProfile {
    std::string id;
    std::string name;
    std::string description;

    friend bool operator==(const AgentProfile&, const AgentProfile&) = default;
};

enum class RecordKind { Post, Comment, Agent };

/// Maps canonical field names to source field names (dotted paths reach into
/// nested objects) and names the files of a snapshot directory.
struct SnapshotSchema {
    std::map<std::string, std::string> post_fields;
    std::map<std::string, std::string> comment_fields;
    std::map<std::string, std::string> agent_fields;
    std::string posts_file = "posts.jsonl";
    std::string comments_file = "comments.jsonl";
    std::string agents_file = "agents.jsonl";

    /// Identity mapping over the canonical field names.
    static SnapshotSchema canonical();
    /// Reads `schema.json` ({"posts": {...}, "comments": {...}, "agents": {...},
    /// "files": {...}}); unspecified fields keep their canonical names.
    static SnapshotSchema from_json_file(const std::filesystem::path& path);
    /// Throws Error(Schema) if a required canonical field is unmapped.
    void validate() const;
};

struct LoadCounters {
    std::size_t lines = 0;
    std::size_t loaded = 0;
    std::size_t skipped = 0;
};

/// Records of one snapshot in file order.
struct Snapshot {
    std::string source;
    std::vector<Post> posts;
    std::vector<Comment> comments;
    std::vector<AgentProfile> agents;
    LoadCounters post_counters;
    LoadCounters comment_counters;
    LoadCounters agent_counters;
};

/// Loads a snapshot directory (files per the schema; missing files load as
/// empty) or a single line-delimited file of `kind`. Malformed lines are
/// counted and skipped. When `path` is a directory containing schema.json and
/// no schema is passed, that file is used.
Snapshot load_snapshot(const std::filesystem::path& path, const std::optional<SnapshotSchema>& schema = std::nullopt);
Snapshot load_records_file(const std::filesystem::path& file, RecordKind kind, const SnapshotSchema& schema);

struct MergeReport {
    std::size_t post_collisions = 0;
    std::size_t comment_collisions = 0;
    std::size_t agent_collisions = 0;
    std::size_t skipped_lines = 0;
    std::vector<std::string> sources;
};

/// Immutable indexed store. Records are held sorted by id; indexes refer to
/// positions in those arrays.
class Corpus {
public:
    Corpus() = default;

    const std::vector<Post>& posts() const { return posts_; }
    const std::vector<Comment>& comments() const { return comments_; }
    const std::vector<AgentProfile>& agents() const { return agents_; }

    const Post* find_post(std::string_view id) const;
    const Comment* find_comment(std::string_view id) const;
    const AgentProfile* find_agent(std::string_view id) const;
    std::optional<std::size_t> post_index(std::string_view id) const;
    std::optional<std::size_t> comment_index(std::string_view id) const;

    /// Comment indexes of a post ordered by (created_at, id).
    std::span<const std::size_t> comments_of_post(std::size_t post_idx) const;
    /// Comment indexes of comments whose post is not in the corpus, keyed by post id.
    const std::map<std::string, std::vector<std::size_t>>& orphan_comments_by_post() const { return orphans_by_post_; }
    /// author_id -> comment indexes ordered by (created_at, id); author ids ascending.
    const std::map<std::string, std::vector<std::size_t>>& comments_by_agent() const { return by_agent_; }

    const MergeReport& merge_report() const { return report_; }
    bool depths_resolved() const { return depths_resolved_; }

    /// Same records, depths and indexes (merge counters are not compared).
    friend bool operator==(const Corpus& a, const Corpus& b);

    /// Records as a single snapshot, for re-merging.
    Snapshot to_snapshot() const;

private:
    friend Corpus merge_dedup(std::span<const Snapshot> snapshots);
    friend Corpus resolve_depths(Corpus corpus);
    friend Corpus build_corpus(std::vector<Post>, std::vector<Comment>, std::vector<AgentProfile>, MergeReport);
    friend Corpus read_corpus_dir(const std::filesystem::path& dir);

    void build_indexes();

    std::vector<Post> posts_;
    std::vector<Comment> comments_;
    std::vector<AgentProfile> agents_;
    std::unordered_map<std::string, std::size_t> post_by_id_;
    std::unordered_map<std::string, std::size_t> comment_by_id_;
    std::unordered_map<std::string, std::size_t> agent_by_id_;
    std::vector<std::vector<std::size_t>> by_post_;
    std::map<std::string, std::vector<std::size_t>> orphans_by_post_;
    std::map<std::string, std::vector<std::size_t>> by_agent_;
    MergeReport report_;
    bool depths_resolved_ = false;
};

/// Snapshots in precedence order; on id collision the earliest snapshot wins.
/// Duplicate ids inside one snapshot keep the first line.
Corpus merge_dedup(std::span<const Snapshot> snapshots);

/// Breadth-first depth assignment from parent-less comments. Comments whose
/// ancestor chain leaves the corpus or cycles stay unresolved.
Corpus resolve_depths(Corpus corpus);

/// Builds a corpus from already-unique records (used by the generator).
Corpus build_corpus(std::vector<Post> posts, std::vector<Comment> comments, std::vector<AgentProfile> agents,
                    MergeReport report = {});

struct CorpusStats {
    std::size_t n_posts = 0;
    std::size_t n_comments = 0;          // all comments
    std::size_t n_resolved_comments = 0;
    std::size_t n_unresolved_comments = 0;
    std::size_t n_agents = 0;            // agent profiles
    std::size_t n_comment_authors = 0;   // distinct author ids over resolved comments
    double pct_top_level = 0.0;
    std::size_t median_comments_per_post = 0;
    std::size_t p95_comments_per_post = 0;
    double mean_comments_per_post = 0.0;
    std::size_t median_comments_per_agent = 0;
    double pct_repeat_pairs = 0.0;
    std::size_t max_comments_same_agent_post = 0;
    std::optional<Timestamp> first_timestamp;
    std::optional<Timestamp> last_timestamp;
};

/// Statistics over resolved comments; per-post counts include posts without
/// comments. Throws Error(EmptyInput) on an empty corpus.
CorpusStats corpus_stats(const Corpus& corpus);
KeyValueDoc stats_document(const CorpusStats& stats, const MergeReport& report);

// ---------------------------------------------------------------------------
// Canonical on-disk form
// ---------------------------------------------------------------------------

/// Writes posts.jsonl, comments.jsonl, agents.jsonl (sorted by id, canonical
/// field order) and ingest.kv with the merge counters.
void write_corpus_dir(const Corpus& corpus, const std::filesystem::path& dir);
/// Loads a directory written by write_corpus_dir and resolves depths.
Corpus read_corpus_dir(const std::filesystem::path& dir);
/// SHA-256 over the three canonical record files.
std::string corpus_content_hash(const std::filesystem::path& dir);

std::string post_to_json_line(const Post& p);
std::string comment_to_json_line(const Comment& c);
std::string agent_to_json_line(const AgentProfile& a);

/// Post text compared against comments: title, then content when non-empty.
std::string post_text(const Post& p);

}  // namespace threadscope

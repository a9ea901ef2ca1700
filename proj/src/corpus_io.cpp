#include "threadscope/corpus.hpp"

#include "threadscope/error.hpp"
#include "threadscope/util.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace threadscope {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string dump_line(const ordered_json& j) {
    // Invalid UTF-8 in source text is replaced rather than rejected.
    return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

std::size_t kv_count(const KeyValueDoc& doc, std::string_view key) {
    const std::string* v = doc.find(key);
    if (!v) return 0;
    try {
        return static_cast<std::size_t>(std::stoull(*v));
    } catch (const std::exception&) {
        return 0;
    }
}

}  // namespace

std::string post_to_json_line(const Post& p) {
    ordered_json j;
    j["id"] = p.id;
    j["title"] = p.title;
    j["content"] = p.content;
    j["submolt"] = p.submolt;
    j["author_id"] = p.author_id;
    j["created_at"] = format_timestamp(p.created_at);
    return dump_line(j);
}

std::string comment_to_json_line(const Comment& c) {
    ordered_json j;
    j["id"] = c.id;
    j["post_id"] = c.post_id;
    j["parent_id"] = c.parent_id ? ordered_json(*c.parent_id) : ordered_json(nullptr);
    j["author_id"] = c.author_id;
    j["created_at"] = format_timestamp(c.created_at);
    j["content"] = c.content;
    return dump_line(j);
}

std::string agent_to_json_line(const AgentProfile& a) {
    ordered_json j;
    j["id"] = a.id;
    j["name"] = a.name;
    j["description"] = a.description;
    return dump_line(j);
}

void write_corpus_dir(const Corpus& corpus, const fs::path& dir) {
    fs::create_directories(dir);
    std::string buf;
    for (const auto& p : corpus.posts()) {
        buf += post_to_json_line(p);
        buf += '\n';
    }
    write_file_atomic(dir / "posts.jsonl", buf);
    buf.clear();
    for (const auto& c : corpus.comments()) {
        buf += comment_to_json_line(c);
        buf += '\n';
    }
    write_file_atomic(dir / "comments.jsonl", buf);
    buf.clear();
    for (const auto& a : corpus.agents()) {
        buf += agent_to_json_line(a);
        buf += '\n';
    }
    write_file_atomic(dir / "agents.jsonl", buf);

    const auto& r = corpus.merge_report();
    KeyValueDoc doc;
    doc.set("format", "threadscope-corpus-1");
    doc.set("n_posts", std::uint64_t{corpus.posts().size()});
    doc.set("n_comments", std::uint64_t{corpus.comments().size()});
    doc.set("n_agents", std::uint64_t{corpus.agents().size()});
    doc.set("post_collisions", std::uint64_t{r.post_collisions});
    doc.set("comment_collisions", std::uint64_t{r.comment_collisions});
    doc.set("agent_collisions", std::uint64_t{r.agent_collisions});
    doc.set("skipped_lines", std::uint64_t{r.skipped_lines});
    doc.set("collision_policy", "first-wins");
    for (std::size_t i = 0; i < r.sources.size(); ++i) doc.set(fmt::format("source_{}", i), r.sources[i]);
    doc.write(dir / "ingest.kv");
}

Corpus read_corpus_dir(const fs::path& dir) {
    if (!fs::is_directory(dir) || !fs::exists(dir / "comments.jsonl") || !fs::exists(dir / "posts.jsonl")) {
        throw Error(ErrorKind::Io, fmt::format("'{}' is not an ingested corpus directory", dir.string()));
    }
    const Snapshot snap = load_snapshot(dir, SnapshotSchema::canonical());
    Corpus merged = merge_dedup(std::span<const Snapshot>(&snap, 1));
    MergeReport report;
    if (fs::exists(dir / "ingest.kv")) {
        const auto doc = KeyValueDoc::read(dir / "ingest.kv");
        report.post_collisions = kv_count(doc, "post_collisions");
        report.comment_collisions = kv_count(doc, "comment_collisions");
        report.agent_collisions = kv_count(doc, "agent_collisions");
        report.skipped_lines = kv_count(doc, "skipped_lines");
        for (std::size_t i = 0;; ++i) {
            const std::string* src = doc.find(fmt::format("source_{}", i));
            if (!src) break;
            report.sources.push_back(*src);
        }
    }
    report.skipped_lines += merged.report_.skipped_lines;
    merged.report_ = std::move(report);
    return resolve_depths(std::move(merged));
}

std::string corpus_content_hash(const fs::path& dir) {
    Sha256 h;
    for (const char* name : {"posts.jsonl", "comments.jsonl", "agents.jsonl"}) {
        h.update(name);
        h.update(std::string_view("\0", 1));
        if (fs::exists(dir / name)) h.update(read_file(dir / name));
        h.update(std::string_view("\0", 1));
    }
    return h.hex_digest();
}

}  // namespace threadscope

#include "threadscope/corpus.hpp"
#include "threadscope/error.hpp"
#include "threadscope/synth.hpp"
#include "threadscope/util.hpp"

#include "support.hpp"

#include <fmt/format.h>
#include <gtest/gtest.h>

#include <fstream>

namespace threadscope {
namespace {

using testing::data_path;
using testing::make_comment;
using testing::make_corpus;
using testing::make_post;
using testing::TempDir;

void write_lines(const std::filesystem::path& file, const std::vector<std::string>& lines) {
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_file_atomic(file, text);
}

TEST(Timestamp, ParsesRfc3339Variants) {
    const auto z = parse_timestamp("2026-01-28T10:00:00Z");
    ASSERT_TRUE(z);
    EXPECT_EQ(parse_timestamp("2026-01-28 10:00:00Z"), z);
    EXPECT_EQ(parse_timestamp("2026-01-28T12:00:00+02:00"), z);
    EXPECT_EQ(parse_timestamp("2026-01-28T10:00:00.000000Z"), z);
    EXPECT_EQ(format_timestamp(*z), "2026-01-28T10:00:00Z");
    EXPECT_EQ(format_timestamp(*parse_timestamp("2026-01-28T10:00:00.25Z")), "2026-01-28T10:00:00.250000Z");
    EXPECT_EQ(parse_timestamp("1970-01-01T00:00:00Z")->micros, 0);
    EXPECT_FALSE(parse_timestamp("yesterday"));
    EXPECT_FALSE(parse_timestamp("2026-13-01T00:00:00Z"));
}

TEST(LoadSnapshot, WellFormedCommentsFile) {
    TempDir dir;
    write_lines(dir / "comments.jsonl",
                {R"({"id":"c1","post_id":"p","parent_id":null,"author_id":"a","created_at":"2026-01-28T00:00:00Z","content":"x"})",
                 R"({"id":"c2","post_id":"p","parent_id":"c1","author_id":"a","created_at":"2026-01-28T00:01:00Z","content":"y"})",
                 R"({"id":"c3","post_id":"p","author_id":"b","created_at":"2026-01-28T00:02:00Z","content":"z"})"});
    const auto snap = load_snapshot(dir / "comments.jsonl");
    EXPECT_EQ(snap.comments.size(), 3u);
    EXPECT_EQ(snap.comment_counters.skipped, 0u);
    EXPECT_EQ(snap.comments[1].parent_id, "c1");
    EXPECT_FALSE(snap.comments[2].parent_id);
}

TEST(LoadSnapshot, MalformedLineIsCountedAndSkipped) {
    TempDir dir;
    auto ok = [](int i) {
        return R"({"id":"c)" + std::to_string(i) +
               R"(","post_id":"p","author_id":"a","created_at":"2026-01-28T00:00:00Z","content":"x"})";
    };
    write_lines(dir / "comments.jsonl", {ok(1), ok(2), "{broken", ok(3), ok(4)});
    const auto snap = load_snapshot(dir / "comments.jsonl");
    EXPECT_EQ(snap.comments.size(), 4u);
    EXPECT_EQ(snap.comment_counters.skipped, 1u);
    EXPECT_EQ(snap.comment_counters.lines, 5u);
}

TEST(LoadSnapshot, RecordCountsEqualLineCounts) {
    // Line counts from `wc -l`: posts 6, comments 8 (one malformed), agents 3.
    const auto base = load_snapshot(data_path("snapshot_base"));
    EXPECT_EQ(base.posts.size(), 6u);
    EXPECT_EQ(base.comments.size() + base.comment_counters.skipped, 8u);
    EXPECT_EQ(base.comment_counters.skipped, 1u);
    EXPECT_EQ(base.agents.size(), 3u);
    // Nested source schema read from schema.json: posts 6, comments 2, no agents file.
    const auto extra = load_snapshot(data_path("snapshot_extra"));
    EXPECT_EQ(extra.posts.size(), 6u);
    EXPECT_EQ(extra.comments.size(), 2u);
    EXPECT_TRUE(extra.agents.empty());
    EXPECT_EQ(extra.posts.front().title, "Mirror 1");
    EXPECT_EQ(extra.posts.front().author_id, "a1");
}

TEST(LoadSnapshot, Errors) {
    EXPECT_THROW(load_snapshot("/nonexistent/threadscope/snapshot"), Error);
    SnapshotSchema s = SnapshotSchema::canonical();
    s.comment_fields.erase("post_id");
    try {
        s.validate();
        FAIL() << "expected a schema error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Schema);
    }
}

Snapshot snapshot_of(std::vector<Post> posts, std::vector<Comment> comments = {}) {
    Snapshot s;
    s.posts = std::move(posts);
    s.comments = std::move(comments);
    return s;
}

TEST(MergeDedup, DisjointUnion) {
    const std::vector<Snapshot> snaps = {snapshot_of({make_post("A", "a")}), snapshot_of({make_post("B", "b")})};
    const Corpus c = merge_dedup(snaps);
    EXPECT_EQ(c.posts().size(), 2u);
    EXPECT_EQ(c.merge_report().post_collisions, 0u);
}

TEST(MergeDedup, FirstSnapshotWins) {
    const std::vector<Snapshot> snaps = {snapshot_of({make_post("X", "t", "v1")}),
                                         snapshot_of({make_post("X", "t", "v2")})};
    const Corpus c = merge_dedup(snaps);
    ASSERT_EQ(c.posts().size(), 1u);
    EXPECT_EQ(c.posts()[0].content, "v1");
    EXPECT_EQ(c.merge_report().post_collisions, 1u);
}

TEST(MergeDedup, TwoSourceFixture) {
    // Base holds p1..p6; the second source repeats p1..p4 and adds p7, p8.
    const std::vector<Snapshot> snaps = {load_snapshot(data_path("snapshot_base")),
                                         load_snapshot(data_path("snapshot_extra"))};
    const Corpus c = resolve_depths(merge_dedup(snaps));
    EXPECT_EQ(c.posts().size(), 8u);
    EXPECT_EQ(c.merge_report().post_collisions, 4u);
    EXPECT_EQ(c.merge_report().comment_collisions, 1u);
    EXPECT_EQ(c.merge_report().skipped_lines, 1u);
    EXPECT_EQ(c.find_post("p1")->title, "Post 1 about memory tools");
    EXPECT_EQ(c.find_comment("c1")->author_id, "a1");
    EXPECT_EQ(c.find_post("p7")->content, "v2 content");
}

TEST(MergeDedup, Idempotent) {
    const std::vector<Snapshot> snaps = {load_snapshot(data_path("snapshot_base")),
                                         load_snapshot(data_path("snapshot_extra"))};
    const Corpus once = merge_dedup(snaps);
    const std::vector<Snapshot> again = {once.to_snapshot()};
    EXPECT_TRUE(merge_dedup(again) == once);
    EXPECT_TRUE(resolve_depths(merge_dedup(again)) == resolve_depths(once));
}

TEST(MergeDedup, OrderIndependentWithinSnapshot) {
    SynthConfig cfg;
    cfg.n_posts = 30;
    cfg.frac_replier = 0.2;
    const Corpus base = generate_corpus(cfg);
    Snapshot shuffled = base.to_snapshot();
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        rng.shuffle(shuffled.posts);
        rng.shuffle(shuffled.comments);
        const std::vector<Snapshot> snaps = {shuffled};
        EXPECT_TRUE(resolve_depths(merge_dedup(snaps)) == base);
    }
}

TEST(ResolveDepths, Chain) {
    const Corpus c = make_corpus({make_post("p", "t")}, {make_comment("c1", "p", "a"),
                                                         make_comment("c2", "p", "b", "x", "c1", 2),
                                                         make_comment("c3", "p", "c", "x", "c2", 3)});
    EXPECT_EQ(c.find_comment("c1")->depth, 0u);
    EXPECT_EQ(c.find_comment("c2")->depth, 1u);
    EXPECT_EQ(c.find_comment("c3")->depth, 2u);
}

TEST(ResolveDepths, MissingParentIsUnresolved) {
    const Corpus c = make_corpus({make_post("p", "t")}, {make_comment("c1", "p", "a", "x", "ghost")});
    EXPECT_FALSE(c.find_comment("c1")->is_resolved());
}

TEST(ResolveDepths, CycleIsUnresolved) {
    const Corpus c = make_corpus({make_post("p", "t")},
                                 {make_comment("a", "p", "x", "u", "b"), make_comment("b", "p", "y", "u", "a"),
                                  make_comment("d", "p", "z", "u", "a")});
    for (const auto& cm : c.comments()) EXPECT_FALSE(cm.is_resolved()) << cm.id;
}

TEST(ResolveDepths, ChildIsParentPlusOne) {
    SynthConfig cfg;
    cfg.n_posts = 50;
    cfg.frac_replier = 0.2;
    const Corpus c = generate_corpus(cfg);
    for (const auto& cm : c.comments()) {
        ASSERT_TRUE(cm.depth);
        EXPECT_LE(*cm.depth, c.comments().size());
        if (cm.parent_id) {
            EXPECT_EQ(*cm.depth, *c.find_comment(*cm.parent_id)->depth + 1);
        } else {
            EXPECT_EQ(*cm.depth, 0u);
        }
    }
}

TEST(CorpusIndex, CommentsOfPostOrderedByTimeThenId) {
    const Corpus c = make_corpus({make_post("p", "t")},
                                 {make_comment("z", "p", "late", "a", std::nullopt, 9),
                                  make_comment("b", "p", "tie", "a", std::nullopt, 5),
                                  make_comment("a", "p", "tie", "a", std::nullopt, 5),
                                  make_comment("m", "p", "early", "a", std::nullopt, 1)});
    std::vector<std::string> ids;
    for (std::size_t i : c.comments_of_post(*c.post_index("p"))) ids.push_back(c.comments()[i].id);
    EXPECT_EQ(ids, std::vector<std::string>({"m", "a", "b", "z"}));
}

TEST(CorpusIndex, OrphansAndAgents) {
    const Corpus c = make_corpus({make_post("p", "t")},
                                 {make_comment("c1", "p", "x", "bob"), make_comment("c2", "elsewhere", "y", "amy")});
    EXPECT_EQ(c.orphan_comments_by_post().count("elsewhere"), 1u);
    ASSERT_EQ(c.comments_by_agent().size(), 2u);
    EXPECT_EQ(c.comments_by_agent().begin()->first, "amy");
}

TEST(CorpusStats, TenCommentsThreeNested) {
    std::vector<Comment> comments;
    for (int i = 0; i < 7; ++i) comments.push_back(make_comment(fmt::format("t{}", i), "p", "x", "a", std::nullopt, i));
    for (int i = 0; i < 3; ++i) comments.push_back(make_comment(fmt::format("n{}", i), "p", "y", "b", "t0", 10 + i));
    const auto s = corpus_stats(make_corpus({make_post("p", "t")}, comments));
    EXPECT_DOUBLE_EQ(s.pct_top_level, 0.7);
    EXPECT_EQ(s.n_resolved_comments, 10u);
}

TEST(CorpusStats, AllTopLevel) {
    SynthConfig cfg;
    cfg.n_posts = 20;
    cfg.frac_template = cfg.frac_echo = cfg.frac_on_topic = cfg.frac_off_topic = 0.25;
    cfg.frac_replier = 0.0;
    EXPECT_DOUBLE_EQ(corpus_stats(generate_corpus(cfg)).pct_top_level, 1.0);
}

TEST(CorpusStats, FixtureCounts) {
    const std::vector<Snapshot> snaps = {load_snapshot(data_path("snapshot_base")),
                                         load_snapshot(data_path("snapshot_extra"))};
    const auto s = corpus_stats(resolve_depths(merge_dedup(snaps)));
    // Resolved: c1 c2 c3 c4 c6 c7 c8; c5 has a missing parent.
    EXPECT_EQ(s.n_comments, 8u);
    EXPECT_EQ(s.n_resolved_comments, 7u);
    EXPECT_EQ(s.n_unresolved_comments, 1u);
    EXPECT_DOUBLE_EQ(s.pct_top_level, 5.0 / 7.0);
    // Per-post resolved counts over 8 posts: 3,1,2,0,0,0,1,0 -> nearest-rank median 0, p95 3.
    EXPECT_EQ(s.median_comments_per_post, 0u);
    EXPECT_EQ(s.p95_comments_per_post, 3u);
    // (a1,p1) has c1 and c3; (a2,p3) has c6 and c7; 5 distinct pairs.
    EXPECT_DOUBLE_EQ(s.pct_repeat_pairs, 2.0 / 5.0);
}

TEST(CorpusStats, EmptyCorpusIsAnError) {
    try {
        corpus_stats(make_corpus({}, {}));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
    }
}

TEST(CorpusDir, RoundTripIsStable) {
    SynthConfig cfg;
    cfg.n_posts = 25;
    const Corpus c = generate_corpus(cfg);
    TempDir a, b;
    write_corpus_dir(c, a.path());
    const Corpus back = read_corpus_dir(a.path());
    EXPECT_TRUE(back == c);
    write_corpus_dir(back, b.path());
    EXPECT_EQ(corpus_content_hash(a.path()), corpus_content_hash(b.path()));
    EXPECT_EQ(read_file(a / "comments.jsonl"), read_file(b / "comments.jsonl"));
}

TEST(PostText, TitleThenContent) {
    EXPECT_EQ(post_text(make_post("p", "Title", "")), "Title");
    EXPECT_EQ(post_text(make_post("p", "Title", "Body")), "Title\nBody");
}

}  // namespace
}  // namespace threadscope

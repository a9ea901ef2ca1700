#include "threadscope/corpus.hpp"
#include "threadscope/error.hpp"
#include "threadscope/synth.hpp"
#include "threadscope/textproc.hpp"
#include "threadscope/util.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

namespace threadscope {
namespace {

SynthConfig small_config() {
    SynthConfig c;
    c.n_posts = 40;
    c.comments_per_post = 6;
    c.n_agents = 10;
    return c;
}

TEST(PseudoWord, DistinctOverALargePrefixAndAcrossTheLengthBoundary) {
    std::set<std::string> seen;
    for (std::uint64_t i = 0; i < 20000; ++i) EXPECT_TRUE(seen.insert(pseudo_word(i)).second) << i;
    constexpr std::uint64_t kShortSpace = 80ull * 80ull * 80ull;
    for (std::uint64_t i = kShortSpace - 50; i < kShortSpace + 50; ++i) EXPECT_TRUE(seen.insert(pseudo_word(i)).second) << i;
    EXPECT_EQ(pseudo_word(kShortSpace - 1).size(), 6u);
    EXPECT_EQ(pseudo_word(kShortSpace).size(), 8u);
    EXPECT_EQ(pseudo_word(123), pseudo_word(123));
    EXPECT_THROW(pseudo_word(~std::uint64_t{0}), Error);
}

TEST(PseudoWord, SurvivesTokenization) {
    for (std::uint64_t i = 0; i < 500; ++i) {
        const std::string w = pseudo_word(i * 997);
        EXPECT_EQ(tokenize(w), TokenSequence({w}));
    }
}

TEST(Archetypes, NamesRoundTripAndAgentIdsEncodeThem) {
    for (Archetype a : kAllArchetypes) EXPECT_EQ(parse_archetype(to_string(a)), a);
    EXPECT_FALSE(parse_archetype("troll"));
    EXPECT_EQ(archetype_of("agent-ontopic-0003"), Archetype::OnTopic);
    EXPECT_EQ(archetype_of("agent-replier-0000"), Archetype::Replier);
    EXPECT_FALSE(archetype_of("someone"));
}

TEST(SynthConfig, ValidationRejectsBadFractionsAndSizes) {
    SynthConfig c;
    c.frac_echo = 0.5;
    EXPECT_THROW(c.validate(), Error);
    c = SynthConfig{};
    c.n_posts = 0;
    EXPECT_THROW(c.validate(), Error);
    c = SynthConfig{};
    c.comment_words_min = 40;
    c.comment_words_max = 10;
    EXPECT_THROW(c.validate(), Error);
    c = SynthConfig{};
    c.frac_template = -0.1;
    c.frac_echo = 0.3;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_NO_THROW(SynthConfig{}.validate());
}

TEST(SynthConfig, DocumentRoundTrip) {
    SynthConfig c = small_config();
    c.count_mode = CommentCountMode::Geometric;
    c.replier_nest_prob = 0.25;
    c.start_time = "2026-02-01T12:00:00Z";
    const auto back = SynthConfig::from_document(KeyValueDoc::parse(c.to_document().to_string()));
    EXPECT_EQ(back.to_document().to_string(), c.to_document().to_string());
    EXPECT_EQ(back.count_mode, CommentCountMode::Geometric);
    EXPECT_EQ(back.n_posts, 40u);
}

TEST(SynthConfig, UnknownKeyIsRejected) {
    EXPECT_THROW(SynthConfig::from_document(KeyValueDoc::parse("n_postz=3\n")), Error);
}

TEST(SynthConfig, CommittedConfigsAreValid) {
    for (const char* name : {"synth_mixed.kv", "synth_separation.kv", "synth_echo.kv", "synth_topic.kv",
                             "synth_replier.kv"}) {
        EXPECT_NO_THROW(SynthConfig::read(testing::config_path(name)).validate()) << name;
    }
}

TEST(GenerateCorpus, DeterministicForAConfig) {
    const Corpus a = generate_corpus(small_config());
    const Corpus b = generate_corpus(small_config());
    EXPECT_TRUE(a == b);
    SynthConfig other = small_config();
    other.seed = 43;
    EXPECT_FALSE(a == generate_corpus(other));
}

TEST(GenerateCorpus, ShapeMatchesConfig) {
    const Corpus c = generate_corpus(small_config());
    EXPECT_EQ(c.posts().size(), 40u);
    EXPECT_EQ(c.comments().size(), 240u);
    EXPECT_EQ(c.agents().size(), 10u);
    EXPECT_TRUE(c.depths_resolved());
    std::map<Archetype, std::size_t> per_archetype;
    for (const auto& a : c.agents()) ++per_archetype[*archetype_of(a.id)];
    for (Archetype a : kAllArchetypes) EXPECT_EQ(per_archetype[a], 2u) << to_string(a);
    for (std::size_t i = 1; i < c.comments().size(); ++i) {
        EXPECT_LT(c.comments()[i - 1].id, c.comments()[i].id);
    }
    for (const auto& cm : c.comments()) {
        ASSERT_TRUE(cm.depth);
        if (cm.parent_id) {
            const Comment* parent = c.find_comment(*cm.parent_id);
            ASSERT_NE(parent, nullptr);
            EXPECT_EQ(*cm.depth, *parent->depth + 1);
            EXPECT_EQ(parent->post_id, cm.post_id);
        }
    }
}

TEST(GenerateCorpus, OnlyRepliersNest) {
    const Corpus c = generate_corpus(small_config());
    for (const auto& cm : c.comments()) {
        if (cm.parent_id) EXPECT_EQ(archetype_of(cm.author_id), Archetype::Replier) << cm.id;
    }
}

TEST(GenerateCorpus, GeometricCountsRespectTheCap) {
    SynthConfig cfg = small_config();
    cfg.count_mode = CommentCountMode::Geometric;
    cfg.comments_per_post = 8;
    cfg.comments_cap = 12;
    cfg.n_posts = 300;
    const Corpus c = generate_corpus(cfg);
    std::size_t total = 0;
    for (std::size_t p = 0; p < c.posts().size(); ++p) {
        const auto n = c.comments_of_post(p).size();
        EXPECT_LE(n, 12u);
        total += n;
    }
    EXPECT_GT(total, 300u * 4);
    EXPECT_LT(total, 300u * 12);
}

TEST(GenerateCorpus, TemplateAgentsRepeatThemselves) {
    SynthConfig cfg = small_config();
    cfg.frac_template = 1.0;
    cfg.frac_echo = cfg.frac_on_topic = cfg.frac_off_topic = cfg.frac_replier = 0.0;
    const Corpus c = generate_corpus(cfg);
    for (const auto& [agent, idx] : c.comments_by_agent()) {
        std::set<std::string> texts;
        for (auto i : idx) texts.insert(c.comments()[i].content);
        EXPECT_EQ(texts.size(), 1u) << agent;
    }
}

TEST(GenerateCorpus, SurvivesADiskRoundTrip) {
    testing::TempDir dir;
    const Corpus c = generate_corpus(small_config());
    write_corpus_dir(c, dir.path());
    EXPECT_TRUE(read_corpus_dir(dir.path()) == c);
}

}  // namespace
}  // namespace threadscope

#include "threadscope/error.hpp"
#include "threadscope/textproc.hpp"
#include "threadscope/util.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

namespace threadscope {
namespace {

using testing::data_path;

TokenSequence toks(std::initializer_list<const char*> words) { return TokenSequence(words.begin(), words.end()); }

std::string join(const TokenSequence& t) {
    std::string out;
    for (const auto& w : t) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

TEST(Tokenize, LowercasesAndDropsPunctuation) {
    EXPECT_EQ(tokenize("The cat sat."), toks({"the", "cat", "sat"}));
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_TRUE(tokenize("  ... !!! ").empty());
}

TEST(Tokenize, UrlContributesHostOnly) {
    EXPECT_EQ(tokenize("Visit https://example.com/page NOW!"), toks({"visit", "example", "com", "now"}));
    EXPECT_EQ(tokenize("see http://sub.site.org/a/b?q=1#x."), toks({"see", "sub", "site", "org"}));
}

TEST(Tokenize, ApostropheStaysInsideWords) {
    EXPECT_EQ(tokenize("don't stop 'quoted' agents'"), toks({"don't", "stop", "quoted", "agents"}));
    // U+2019 folds to an ASCII apostrophe.
    EXPECT_EQ(tokenize("it’s"), toks({"it's"}));
}

TEST(Tokenize, KeepsDigitsAndUnicodeLetters) {
    EXPECT_EQ(tokenize("1000 tps, v2.0"), toks({"1000", "tps", "v2", "0"}));
    EXPECT_EQ(tokenize("Café ÜBER naïve"), toks({"café", "über", "naïve"}));
    EXPECT_EQ(tokenize("Привет мир"), toks({"привет", "мир"}));
    EXPECT_EQ(tokenize("great—really \U0001F680 launch"), toks({"great", "really", "launch"}));
}

TEST(Tokenize, MalformedUtf8IsNotFatal) {
    const std::string bad = std::string("ok ") + '\xff' + '\xfe' + " fine";
    const auto t = tokenize(bad);
    EXPECT_EQ(t.front(), "ok");
    EXPECT_EQ(t.back(), "fine");
    for (const auto& w : t) EXPECT_FALSE(w.empty());
}

TEST(Tokenize, IdempotentOnJoinedOutput) {
    Rng rng(11);
    const std::string alphabet = "abcXYZ09 .,!?'-/:é";
    for (int trial = 0; trial < 500; ++trial) {
        std::string text;
        const auto len = rng.below(60);
        for (std::uint64_t i = 0; i < len; ++i) text.push_back(alphabet[rng.below(alphabet.size())]);
        const auto once = tokenize(text);
        EXPECT_EQ(tokenize(join(once)), once) << text;
        for (const auto& w : once) EXPECT_FALSE(w.empty());
    }
}

TEST(Stoplist, BundledListIsVersionedAndHashed) {
    const auto& s = Stoplist::english();
    EXPECT_GE(s.size(), 150u);
    EXPECT_FALSE(s.version().empty());
    EXPECT_EQ(s.content_hash().size(), 64u);
    EXPECT_TRUE(s.contains("the"));
    EXPECT_TRUE(s.contains("and"));
    EXPECT_FALSE(s.contains("cat"));
    EXPECT_TRUE(std::is_sorted(s.words().begin(), s.words().end()));
}

TEST(ContentWords, RemovesStopwordsAndDuplicates) {
    EXPECT_EQ(content_words(toks({"the", "cat", "sat"})).words(), std::vector<std::string>({"cat", "sat"}));
    EXPECT_TRUE(content_words(toks({"the", "and", "of", "a"})).empty());
    EXPECT_EQ(content_words(toks({"cat", "cat", "the"})).size(), 1u);
}

TEST(ContentWords, TypicalCommentMatchesHandCount) {
    // 21 tokens; stopwords: this, is, a, of, the, on, and, i, to, it (x2), with, in.
    const std::string comment =
        "This is a solid summary of the benchmark results on memory and I want to rerun it with it in production";
    const auto t = tokenize(comment);
    ASSERT_EQ(t.size(), 21u);
    const std::vector<std::string> expected = {"benchmark", "memory", "production", "rerun",
                                               "results",   "solid",  "summary",    "want"};
    EXPECT_EQ(content_words(t).words(), expected);
}

TEST(ContentWords, NeverContainsStopwords) {
    const auto& stop = Stoplist::english();
    Rng rng(5);
    std::vector<std::string> vocab = stop.words();
    for (const char* w : {"cat", "agent", "memory", "post", "thread", "token"}) vocab.emplace_back(w);
    for (int trial = 0; trial < 200; ++trial) {
        TokenSequence t;
        for (int i = 0; i < 30; ++i) t.push_back(vocab[rng.below(vocab.size())]);
        const auto kept = content_words(t);
        for (const auto& w : kept.words()) EXPECT_FALSE(stop.contains(w)) << w;
    }
}

TEST(Ngrams, SetsNotMultisets) {
    const auto t = toks({"a", "b", "a"});
    const auto uni = ngram_set(t, 1);
    EXPECT_EQ(uni.size(), 2u);
    EXPECT_TRUE(uni.contains("a"));
    EXPECT_TRUE(uni.contains("b"));
    const auto bi = ngram_set(t, 2);
    EXPECT_EQ(bi.size(), 2u);
    EXPECT_TRUE(bi.contains("a b"));
    EXPECT_TRUE(bi.contains("b a"));
    EXPECT_EQ(ngram_set(toks({"solo"}), 2).size(), 0u);
    EXPECT_EQ(ngram_set(TokenSequence{}, 1).size(), 0u);
}

TEST(Ngrams, RejectsOtherOrders) {
    EXPECT_THROW(ngram_set(toks({"a"}), 3), Error);
    EXPECT_THROW(ngram_set(toks({"a"}), 0), Error);
}

TEST(Ngrams, SizeBoundedByWindowCount) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        TokenSequence t;
        const auto len = rng.below(12);
        for (std::uint64_t i = 0; i < len; ++i) t.push_back(std::string(1, static_cast<char>('a' + rng.below(4))));
        for (int n : {1, 2}) {
            const std::size_t windows = t.size() >= static_cast<std::size_t>(n) ? t.size() - n + 1 : 0;
            EXPECT_LE(ngram_set(t, n).size(), windows);
        }
    }
}

TEST(Compression, PinnedIdentity) {
    EXPECT_EQ(kCompressionLevel, 9);
    EXPECT_NE(compressor_id().find("deflate-level9"), std::string::npos);
}

// Lengths below were produced by an independent zlib binding at level 9 and frozen.
TEST(Compression, FrozenLengths) {
    EXPECT_EQ(compressed_len(""), 8u);
    std::string abab;
    for (int i = 0; i < 10000; ++i) abab += "ab";
    EXPECT_EQ(compressed_len(abab), 45u);
    EXPECT_EQ(compressed_len(read_file(data_path("natural_1k.txt"))), 552u);
    EXPECT_EQ(compressed_len(read_file(data_path("random_a.bin"))), 1035u);
    EXPECT_EQ(compressed_len(read_file(data_path("random_b.bin"))), 1035u);
}

TEST(Compression, RandomDataIsIncompressible) {
    const auto a = compressed_len(read_file(data_path("random_a.bin")));
    const auto b = compressed_len(read_file(data_path("random_b.bin")));
    EXPECT_GE(a, 0.95 * 1024);
    EXPECT_LE(std::max(a, b), 1.05 * std::min(a, b));
}

TEST(Compression, SelfConcatenationCompressesBelowDouble) {
    Rng rng(9);
    const std::string nat = read_file(data_path("natural_1k.txt"));
    for (int trial = 0; trial < 50; ++trial) {
        const auto start = rng.below(nat.size() - 300);
        const std::string x = nat.substr(start, 256 + rng.below(nat.size() - start - 256));
        EXPECT_LT(compressed_len(x + x), 2 * compressed_len(x));
    }
}

TEST(Concat, SingleNewlineSeparator) {
    EXPECT_EQ(concat("a", "b"), "a\nb");
    EXPECT_EQ(concat("", "b"), "b");
    EXPECT_EQ(concat("a", ""), "a\n");
}

}  // namespace
}  // namespace threadscope

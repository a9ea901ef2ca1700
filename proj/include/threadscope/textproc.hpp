#pragma once
// Deterministic text primitives shared by every metric: tokenizer, stoplist,
// n-gram sets and the pinned compressor.

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace threadscope {

/// Lowercase tokens, in text order. Never contains an empty token.
using TokenSequence = std::vector<std::string>;

/// Sorted, duplicate-free set of non-stopword tokens.
class ContentWordSet {
public:
    ContentWordSet() = default;
    /// Sorts and deduplicates `words`.
    explicit ContentWordSet(std::vector<std::string> words);

    const std::vector<std::string>& words() const { return words_; }
    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    bool contains(std::string_view w) const;

    friend bool operator==(const ContentWordSet&, const ContentWordSet&) = default;

private:
    std::vector<std::string> words_;
};

/// Set of contiguous n-token windows. Bigram keys join the two tokens with a
/// single space, which never occurs inside a token.
struct NgramSet {
    int n = 1;
    std::unordered_set<std::string> grams;

    std::size_t size() const { return grams.size(); }
    bool contains(const std::string& g) const { return grams.count(g) != 0; }
};

/// Maximal runs of Unicode letters/digits, lowercased. An apostrophe between
/// two word characters stays inside the token (U+2019 is folded to '). An
/// http(s) URL contributes only its host, split on the same rules.
TokenSequence tokenize(std::string_view text);

/// The bundled stoplist, its version tag and the SHA-256 of the resource file.
class Stoplist {
public:
    static const Stoplist& english();

    bool contains(std::string_view token) const;
    std::size_t size() const { return words_.size(); }
    const std::string& version() const { return version_; }
    const std::string& content_hash() const { return hash_; }
    const std::vector<std::string>& words() const { return words_; }

private:
    Stoplist();
    std::vector<std::string> words_;  // sorted
    std::string version_;
    std::string hash_;
};

ContentWordSet content_words(const TokenSequence& tokens, const Stoplist& stoplist = Stoplist::english());

/// n must be 1 or 2.
NgramSet ngram_set(const TokenSequence& tokens, int n);

/// Adds every n-gram of `tokens` to `into` (n taken from `into`).
void add_ngrams(const TokenSequence& tokens, NgramSet& into);

// ---------------------------------------------------------------------------
// Compression
// ---------------------------------------------------------------------------

inline constexpr int kCompressionLevel = 9;
inline constexpr char kConcatSeparator = '\n';

/// Compressor identity as recorded in run manifests.
std::string compressor_id();

/// Size in bytes of the zlib stream (DEFLATE, level 9) for `data`.
std::size_t compressed_len(std::string_view data);

/// Byte concatenation with the single-newline separator used everywhere a
/// metric joins two texts. An empty left side contributes no separator.
std::string concat(std::string_view a, std::string_view b);

}  // namespace threadscope

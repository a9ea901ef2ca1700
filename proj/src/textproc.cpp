#include "threadscope/textproc.hpp"

#include "threadscope/error.hpp"
#include "threadscope/util.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <algorithm>
#include <cstdint>

namespace threadscope {

namespace detail {
extern const std::string_view kStoplistText;
}

namespace {

constexpr char32_t kInvalid = 0xFFFD;

// Decodes one code point at `pos`, advancing it. Malformed sequences yield
// U+FFFD and consume a single byte.
char32_t decode_utf8(std::string_view s, std::size_t& pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) {
        ++pos;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++pos;
        return kInvalid;
    }
    if (pos + len > s.size()) {
        ++pos;
        return kInvalid;
    }
    for (int i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return kInvalid;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++pos;
        return kInvalid;
    }
    pos += len;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

struct Range {
    char32_t lo, hi;
};

// Non-ASCII blocks that hold punctuation, symbols, spaces, emoji and
// private-use code points. Everything else above U+007F counts as a letter.
constexpr Range kNonWordRanges[] = {
    {0x0080, 0x00A9}, {0x00AB, 0x00B4}, {0x00B6, 0x00B9}, {0x00BB, 0x00BF},
    {0x00D7, 0x00D7}, {0x00F7, 0x00F7}, {0x037E, 0x037E}, {0x0387, 0x0387},
    {0x055A, 0x055F}, {0x0589, 0x058A}, {0x05BE, 0x05BE}, {0x05C0, 0x05C0},
    {0x05C3, 0x05C3}, {0x05F3, 0x05F4}, {0x060C, 0x060D}, {0x061B, 0x061F},
    {0x066A, 0x066D}, {0x06D4, 0x06D4}, {0x0964, 0x0965}, {0x0E5A, 0x0E5B},
    {0x1680, 0x1680}, {0x180E, 0x180E}, {0x2000, 0x2BFF}, {0x2E00, 0x2E7F},
    {0x3000, 0x3004}, {0x3008, 0x3020}, {0x3030, 0x3030}, {0xD800, 0xF8FF},
    {0xFD3E, 0xFD3F}, {0xFE00, 0xFE6F}, {0xFEFF, 0xFEFF}, {0xFF00, 0xFF0F},
    {0xFF1A, 0xFF20}, {0xFF3B, 0xFF40}, {0xFF5B, 0xFF65}, {0xFFE0, 0xFFFF},
    {0x1F000, 0x1FAFF}, {0xE0000, 0x10FFFF},
};

bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    }
    const auto it = std::upper_bound(std::begin(kNonWordRanges), std::end(kNonWordRanges), cp,
                                     [](char32_t v, const Range& r) { return v < r.lo; });
    if (it == std::begin(kNonWordRanges)) return true;
    const Range& r = *(it - 1);
    return cp > r.hi;
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

bool is_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
           cp == 0x00A0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x2028 ||
           cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

// Case folding for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
char32_t to_lower(char32_t cp) {
    if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
    if (cp >= 0x100 && cp <= 0x17F) {
        if (cp == 0x130) return U'i';
        if (cp == 0x178) return 0xFF;
        const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
        if (odd_upper) return (cp % 2 == 1) ? cp + 1 : cp;
        if (cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
        return (cp % 2 == 0) ? cp + 1 : cp;
    }
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
    return cp;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char c = s[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
        if (c != prefix[i]) return false;
    }
    return true;
}

// Word-character runs in `text`, appended to `out`.
void tokenize_plain(std::string_view text, TokenSequence& out) {
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = decode_utf8(text, pos);
        if (is_word_char(cp)) {
            append_utf8(current, to_lower(cp));
            continue;
        }
        if (is_apostrophe(cp) && !current.empty() && pos < text.size()) {
            std::size_t peek = pos;
            if (is_word_char(decode_utf8(text, peek))) {
                current.push_back('\'');
                continue;
            }
        }
        if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
}

// Host part of an http(s) URL that starts at text[0]; `consumed` receives
// the byte length of the whole URL (up to the next whitespace).
std::string_view url_host(std::string_view text, std::size_t& consumed) {
    const std::size_t scheme = starts_with_ci(text, "https://") ? 8 : 7;
    std::size_t end = scheme;
    while (end < text.size()) {
        std::size_t next = end;
        if (is_space(decode_utf8(text, next))) break;
        end = next;
    }
    consumed = end;
    std::string_view rest = text.substr(scheme, end - scheme);
    rest = rest.substr(0, std::min(rest.find_first_of("/?#"), rest.size()));
    if (const auto at = rest.rfind('@'); at != std::string_view::npos) rest.remove_prefix(at + 1);
    if (const auto colon = rest.find(':'); colon != std::string_view::npos) rest = rest.substr(0, colon);
    return rest;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
    TokenSequence out;
    std::size_t segment_start = 0;
    std::size_t pos = 0;
    bool prev_word = false;
    while (pos < text.size()) {
        const bool url_here = !prev_word && (text[pos] == 'h' || text[pos] == 'H') &&
                              (starts_with_ci(text.substr(pos), "http://") ||
                               starts_with_ci(text.substr(pos), "https://"));
        if (url_here) {
            tokenize_plain(text.substr(segment_start, pos - segment_start), out);
            std::size_t consumed = 0;
            const auto host = url_host(text.substr(pos), consumed);
            tokenize_plain(host, out);
            pos += consumed;
            segment_start = pos;
            prev_word = false;
            continue;
        }
        const char32_t cp = decode_utf8(text, pos);
        prev_word = is_word_char(cp);
    }
    tokenize_plain(text.substr(segment_start), out);
    return out;
}

// ---------------------------------------------------------------------------

ContentWordSet::ContentWordSet(std::vector<std::string> words) : words_(std::move(words)) {
    std::sort(words_.begin(), words_.end());
    words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
}

bool ContentWordSet::contains(std::string_view w) const {
    return std::binary_search(words_.begin(), words_.end(), w);
}

Stoplist::Stoplist() {
    const std::string_view text = detail::kStoplistText;
    hash_ = sha256_hex(text);
    version_ = "en-1";
    for (auto& line : split(text, '\n')) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        words_.push_back(std::move(line));
    }
    std::sort(words_.begin(), words_.end());
    words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
}

const Stoplist& Stoplist::english() {
    static const Stoplist instance;
    return instance;
}

bool Stoplist::contains(std::string_view token) const {
    return std::binary_search(words_.begin(), words_.end(), token);
}

ContentWordSet content_words(const TokenSequence& tokens, const Stoplist& stoplist) {
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (!stoplist.contains(t)) kept.push_back(t);
    }
    return ContentWordSet(std::move(kept));
}

NgramSet ngram_set(const TokenSequence& tokens, int n) {
    if (n != 1 && n != 2) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("ngram order must be 1 or 2, got {}", n));
    }
    NgramSet out;
    out.n = n;
    add_ngrams(tokens, out);
    return out;
}

void add_ngrams(const TokenSequence& tokens, NgramSet& into) {
    if (into.n == 1) {
        for (const auto& t : tokens) into.grams.insert(t);
        return;
    }
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        std::string key;
        key.reserve(tokens[i].size() + tokens[i + 1].size() + 1);
        key += tokens[i];
        key += ' ';
        key += tokens[i + 1];
        into.grams.insert(std::move(key));
    }
}

// ---------------------------------------------------------------------------

std::string compressor_id() { return fmt::format("zlib-{}-deflate-level{}", ZLIB_VERSION, kCompressionLevel); }

std::size_t compressed_len(std::string_view data) {
    uLongf dest_len = compressBound(static_cast<uLong>(data.size()));
    std::string buffer(dest_len, '\0');
    const int rc = compress2(reinterpret_cast<Bytef*>(buffer.data()), &dest_len,
                             reinterpret_cast<const Bytef*>(data.data()), static_cast<uLong>(data.size()),
                             kCompressionLevel);
    if (rc != Z_OK) throw Error(ErrorKind::Io, fmt::format("zlib compress2 failed with code {}", rc));
    return static_cast<std::size_t>(dest_len);
}

std::string concat(std::string_view a, std::string_view b) {
    if (a.empty()) return std::string(b);
    std::string out;
    out.reserve(a.size() + b.size() + 1);
    out += a;
    out += kConcatSeparator;
    out += b;
    return out;
}

}  // namespace threadscope

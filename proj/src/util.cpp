#include "threadscope/util.hpp"

#include "threadscope/error.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include <unistd.h>

namespace threadscope {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::EmptyInput: return "empty_input";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::DimensionMismatch: return "dimension_mismatch";
        case ErrorKind::Provider: return "provider";
    }
    return "unknown";
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
    return splitmix64(master ^ fnv1a64(label));
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "Rng::below: n must be positive");
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                (std::numeric_limits<std::uint64_t>::max() % n);
    for (;;) {
        const std::uint64_t x = engine_();
        if (x < limit) return x % n;
    }
}

double Rng::unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::vector<std::uint64_t> sample_indices(std::uint64_t population, std::uint64_t k, Rng& rng) {
    std::vector<std::uint64_t> out;
    if (k >= population) {
        out.resize(population);
        for (std::uint64_t i = 0; i < population; ++i) out[i] = i;
        return out;
    }
    out.reserve(k);
    if (k * 4 >= population) {
        std::vector<std::uint64_t> all(population);
        for (std::uint64_t i = 0; i < population; ++i) all[i] = i;
        for (std::uint64_t i = 0; i < k; ++i) {
            const std::uint64_t j = i + rng.below(population - i);
            std::swap(all[i], all[j]);
            out.push_back(all[i]);
        }
    } else {
        // Floyd's algorithm: k draws, no rejection loop over a dense range.
        std::unordered_set<std::uint64_t> chosen;
        chosen.reserve(k * 2);
        for (std::uint64_t j = population - k; j < population; ++j) {
            const std::uint64_t t = rng.below(j + 1);
            if (chosen.insert(t).second) {
                out.push_back(t);
            } else {
                chosen.insert(j);
                out.push_back(j);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
    EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::string_view bytes) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
}

std::string Sha256::hex_digest() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), digest, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes);
    return h.hex_digest();
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
    if (v == 0.0) return "0";  // folds -0
    return fmt::format("{}", v);
}

void KeyValueDoc::set(std::string key, std::string value) {
    for (char& c : value) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries_.emplace_back(std::move(key), std::move(value));
}

void KeyValueDoc::set(std::string key, double value) { set(std::move(key), format_double(value)); }
void KeyValueDoc::set(std::string key, std::int64_t value) { set(std::move(key), std::to_string(value)); }
void KeyValueDoc::set(std::string key, std::uint64_t value) { set(std::move(key), std::to_string(value)); }

const std::string* KeyValueDoc::find(std::string_view key) const {
    for (const auto& [k, v] : entries_) {
        if (k == key) return &v;
    }
    return nullptr;
}

std::string KeyValueDoc::to_string() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

void KeyValueDoc::write(const std::filesystem::path& path) const { write_file_atomic(path, to_string()); }

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
    KeyValueDoc doc;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::Schema, fmt::format("key/value line {} has no '='", line_no));
        }
        doc.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return doc;
}

KeyValueDoc KeyValueDoc::read(const std::filesystem::path& path) { return parse(read_file(path)); }

void TsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("tsv row has {} cells, header has {}", row.size(), header_.size()));
    }
    rows_.push_back(std::move(row));
}

std::size_t TsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == name) return i;
    }
    throw Error(ErrorKind::Schema, fmt::format("tsv table has no column '{}'", name));
}

std::string TsvTable::to_string() const {
    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += '\t';
            out += cells[i];
        }
        out += '\n';
    };
    emit(header_);
    for (const auto& r : rows_) emit(r);
    return out;
}

void TsvTable::write(const std::filesystem::path& path) const { write_file_atomic(path, to_string()); }

TsvTable TsvTable::parse(std::string_view text) {
    auto lines = split(text, '\n');
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw Error(ErrorKind::Schema, "tsv table has no header");
    TsvTable table(split(lines.front(), '\t'));
    for (std::size_t i = 1; i < lines.size(); ++i) table.add_row(split(lines[i], '\t'));
    return table;
}

TsvTable TsvTable::read(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string tsv_escape(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    static std::atomic<std::uint64_t> counter{0};
    auto tmp = path;
    tmp += fmt::format(".tmp{}-{}", ::getpid(), counter.fetch_add(1));
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", tmp.string()));
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::Io, fmt::format("short write to '{}'", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorKind::Io, fmt::format("cannot rename into '{}'", path.string()));
    }
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            return out;
        }
        out.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace threadscope

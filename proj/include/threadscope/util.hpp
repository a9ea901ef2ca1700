#pragma once
// Shared plumbing: seeded sampling, hashing, bounded parallelism and the
// flat text formats (key=value documents, tab-separated tables).

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace threadscope {

// ---------------------------------------------------------------------------
// Seeds and sampling
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Sub-seed for a named stream: splitmix64(master ^ fnv1a64(label)).
/// Every module derives its generators this way so one master seed fixes a run.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept;

/// mt19937_64 with integer-only helpers; std distributions are avoided because
/// their output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);
    /// Uniform in [0, 1) with 53 bits of resolution.
    double unit();
    bool bernoulli(double p) { return unit() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// k distinct indices from [0, population), ascending. Returns every index
/// when k >= population.
std::vector<std::uint64_t> sample_indices(std::uint64_t population, std::uint64_t k, Rng& rng);

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes);

/// Incremental SHA-256 over several byte ranges.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view bytes);
    std::string hex_digest();

private:
    void* ctx_;
};

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// thrown by any task is rethrown on the caller after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Ordered flat key/value document, serialized as `key=value` lines.
class KeyValueDoc {
public:
    void set(std::string key, std::string value);
    void set(std::string key, double value);
    void set(std::string key, std::int64_t value);
    void set(std::string key, std::uint64_t value);
    void set(std::string key, int value) { set(std::move(key), static_cast<std::int64_t>(value)); }
    void set(std::string key, bool value) { set(std::move(key), std::string(value ? "true" : "false")); }
    void set(std::string key, const char* value) { set(std::move(key), std::string(value)); }

    const std::string* find(std::string_view key) const;
    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    std::string to_string() const;
    void write(const std::filesystem::path& path) const;

    /// Parses `key=value` lines; blank lines and lines starting with '#' are ignored.
    static KeyValueDoc parse(std::string_view text);
    static KeyValueDoc read(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Tab-separated table with a header row. Cells must not contain tabs or
/// newlines; callers sanitize free text with `tsv_escape`.
class TsvTable {
public:
    explicit TsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> row);
    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    std::size_t column(std::string_view name) const;
    std::string to_string() const;
    void write(const std::filesystem::path& path) const;

    static TsvTable parse(std::string_view text);
    static TsvTable read(const std::filesystem::path& path);

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string tsv_escape(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename so readers never see partial
/// files. Missing parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::vector<std::string> split(std::string_view text, char sep);

}  // namespace threadscope

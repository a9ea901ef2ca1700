#pragma once
// External services behind one contract: embedding and judge-completion
// backends, a content-addressed on-disk cache, bounded concurrent dispatch
// with retries. Failures surface as absent values, never as run failures.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace threadscope {

using EmbeddingVector = std::vector<float>;

/// Raised by backends for a failed request; the client retries these.
class ProviderFailure : public std::runtime_error {
public:
    ProviderFailure(const std::string& what, bool retryable) : std::runtime_error(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

struct ProviderConfig {
    std::string kind;            // "mock", "openai", "anthropic"
    std::string endpoint;        // base URL, or fixture path for mock
    std::string model;
    std::string credential_env;  // environment variable holding the key; the value is never stored
    std::size_t max_in_flight = 4;
    std::size_t retry_budget = 3;  // retries after the first attempt
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(250), std::chrono::milliseconds(1000),
                                                   std::chrono::milliseconds(4000)};
    std::size_t batch_size = 64;
    std::size_t max_input_chars = 8000;  // longer embedding inputs are truncated
    std::size_t dims = 0;                // 0: adopt the first response's dimension
    double temperature = 0.0;
    int max_tokens = 256;
    std::chrono::seconds timeout{60};

    /// `mock:<fixture.json>`, `openai:<model>[@<base-url>]`,
    /// `anthropic:<model>[@<base-url>]`.
    /// Credential variables default to OPENAI_API_KEY / ANTHROPIC_API_KEY.
    static ProviderConfig parse(std::string_view spec);
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::string model_id() const = 0;
    /// One vector per text, order-aligned. Throws ProviderFailure.
    virtual std::vector<EmbeddingVector> fetch(std::span<const std::string> texts) = 0;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string model_id() const = 0;
    /// Raw model output text. Throws ProviderFailure.
    virtual std::string complete(const std::string& prompt) = 0;
};

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const ProviderConfig& config);
std::unique_ptr<CompletionBackend> make_completion_backend(const ProviderConfig& config);

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

/// Content-addressed persistent store: <dir>/<namespace>/<hh>/<sha256>.
/// Concurrent readers; writes are serialized and land via rename.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    /// sha256(model '\0' text).
    static std::string key(std::string_view model, std::string_view text);

    std::optional<std::string> get(std::string_view ns, const std::string& key) const;
    void put(std::string_view ns, const std::string& key, std::string_view value);

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path path_for(std::string_view ns, const std::string& key) const;

    std::filesystem::path dir_;
    std::mutex write_mutex_;
};

std::string encode_vector(const EmbeddingVector& v);
std::optional<EmbeddingVector> decode_vector(std::string_view bytes);

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

struct ProviderCounters {
    std::size_t requests = 0;        // texts/prompts asked for
    std::size_t cache_hits = 0;
    std::size_t network_fetches = 0; // backend calls, retries included
    std::size_t absent = 0;
    std::size_t rejected = 0;        // empty inputs refused before dispatch
};

struct EmbedResult {
    std::vector<std::optional<EmbeddingVector>> vectors;
    std::vector<bool> truncated;
};

class EmbeddingClient {
public:
    /// `cache` may be null (no persistence).
    EmbeddingClient(std::shared_ptr<EmbeddingBackend> backend, ProviderConfig config,
                    std::shared_ptr<ResponseCache> cache);

    /// Cache first; misses go out in batches with at most max_in_flight
    /// batches outstanding. Exhausted retries leave the affected entries
    /// absent. Throws Error(DimensionMismatch) if a vector disagrees with the
    /// run's dimension.
    EmbedResult embed_batch(std::span<const std::string> texts);

    ProviderCounters counters() const;
    std::string model_id() const { return backend_->model_id(); }
    std::size_t dims() const { return dims_.load(); }

private:
    void check_dims(const EmbeddingVector& v);

    std::shared_ptr<EmbeddingBackend> backend_;
    ProviderConfig config_;
    std::shared_ptr<ResponseCache> cache_;
    std::atomic<std::size_t> dims_{0};
    mutable std::mutex counters_mutex_;
    ProviderCounters counters_;
};

class JudgeClient {
public:
    JudgeClient(std::shared_ptr<CompletionBackend> backend, ProviderConfig config,
                std::shared_ptr<ResponseCache> cache);

    /// Cached by (model, prompt). nullopt once retries are exhausted.
    std::optional<std::string> complete_judgement(const std::string& prompt);

    ProviderCounters counters() const;
    std::string model_id() const { return backend_->model_id(); }
    const ProviderConfig& config() const { return config_; }

private:
    std::shared_ptr<CompletionBackend> backend_;
    ProviderConfig config_;
    std::shared_ptr<ResponseCache> cache_;
    mutable std::mutex counters_mutex_;
    ProviderCounters counters_;
};

/// Cuts `text` to at most `max_bytes` bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view text, std::size_t max_bytes);

// ---------------------------------------------------------------------------
// Offline providers
// ---------------------------------------------------------------------------

/// Deterministic hashed bag-of-words embedding: each content word (or, if
/// none, each token) adds ±1 to a hashed coordinate; the result is unit norm.
EmbeddingVector hashed_embedding(std::string_view text, std::size_t dims);

/// Fixture-driven offline provider. Fixture JSON:
///   {"model": "...",
///    "embedding": {"dims": 64, "vectors": {"<text>": [...]}, "fail": ["<text>"]},
///    "completion": {"rules": [{"contains": "...", "output": "..."}],
///                   "sequence": ["...", ...], "default": "..."},
///    "latency_ms": 0}
/// Embeddings not listed fall back to hashed_embedding. Completions use the
/// first matching rule, else the next sequence entry (in call order), else
/// the default. Tracks concurrent calls for in-flight assertions.
class MockProvider : public EmbeddingBackend, public CompletionBackend {
public:
    struct Script {
        std::string model = "mock";
        std::size_t dims = 64;
        std::vector<std::pair<std::string, EmbeddingVector>> vectors;
        std::vector<std::string> fail_texts;
        std::vector<std::pair<std::string, std::string>> rules;
        std::vector<std::string> sequence;
        std::optional<std::string> default_output;
        std::chrono::milliseconds latency{0};
        /// Fails the first N calls with a retryable error.
        std::size_t transient_failures = 0;
    };

    explicit MockProvider(Script script);
    static std::shared_ptr<MockProvider> from_fixture(const std::filesystem::path& path);

    std::string model_id() const override { return script_.model; }
    std::vector<EmbeddingVector> fetch(std::span<const std::string> texts) override;
    std::string complete(const std::string& prompt) override;

    std::size_t calls() const { return calls_.load(); }
    std::size_t max_concurrent() const { return max_concurrent_.load(); }

private:
    void enter();
    void leave();

    Script script_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> max_concurrent_{0};
    std::atomic<std::size_t> sequence_pos_{0};
    std::atomic<std::size_t> failures_left_{0};
};

}  // namespace threadscope

#include "threadscope/providers.hpp"

#include "threadscope/error.hpp"
#include "threadscope/textproc.hpp"
#include "threadscope/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>
#include <unordered_map>

namespace threadscope {

namespace fs = std::filesystem;

ProviderConfig ProviderConfig::parse(std::string_view spec) {
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos || colon + 1 >= spec.size()) {
        throw Error(ErrorKind::InvalidArgument, "provider spec must be kind:value, got '" + std::string(spec) + "'");
    }
    ProviderConfig cfg;
    cfg.kind = std::string(spec.substr(0, colon));
    const std::string_view rest = spec.substr(colon + 1);
    if (cfg.kind == "mock") {
        cfg.endpoint = std::string(rest);
        cfg.retry_budget = 1;
        cfg.backoff = {std::chrono::milliseconds(0)};
        return cfg;
    }
    if (cfg.kind != "openai" && cfg.kind != "anthropic") {
        throw Error(ErrorKind::InvalidArgument, "unknown provider kind '" + cfg.kind + "'");
    }
    const auto at = rest.find('@');
    cfg.model = std::string(rest.substr(0, at));
    if (cfg.model.empty()) throw Error(ErrorKind::InvalidArgument, "provider spec has no model");
    if (cfg.kind == "openai") {
        cfg.endpoint = "https://api.openai.com";
        cfg.credential_env = "OPENAI_API_KEY";
    } else {
        cfg.endpoint = "https://api.anthropic.com";
        cfg.credential_env = "ANTHROPIC_API_KEY";
    }
    if (at != std::string_view::npos) cfg.endpoint = std::string(rest.substr(at + 1));
    return cfg;
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

std::string ResponseCache::key(std::string_view model, std::string_view text) {
    Sha256 h;
    h.update(model);
    h.update(std::string_view("\0", 1));
    h.update(text);
    return h.hex_digest();
}

fs::path ResponseCache::path_for(std::string_view ns, const std::string& key) const {
    return dir_ / std::string(ns) / key.substr(0, 2) / key;
}

std::optional<std::string> ResponseCache::get(std::string_view ns, const std::string& key) const {
    const fs::path p = path_for(ns, key);
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) return std::nullopt;
    return bytes;
}

void ResponseCache::put(std::string_view ns, const std::string& key, std::string_view value) {
    const fs::path p = path_for(ns, key);
    std::lock_guard lock(write_mutex_);
    fs::create_directories(p.parent_path());
    write_file_atomic(p, value);
}

std::string encode_vector(const EmbeddingVector& v) {
    std::string out(v.size() * 4, '\0');
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(v[i]);
        for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
    return out;
}

std::optional<EmbeddingVector> decode_vector(std::string_view bytes) {
    if (bytes.empty() || bytes.size() % 4 != 0) return std::nullopt;
    EmbeddingVector v(bytes.size() / 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
        v[i] = std::bit_cast<float>(bits);
        if (!std::isfinite(v[i])) return std::nullopt;
    }
    return v;
}

std::string truncate_utf8(std::string_view text, std::size_t max_bytes) {
    if (text.size() <= max_bytes) return std::string(text);
    std::size_t cut = max_bytes;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0u) == 0x80u) --cut;
    return std::string(text.substr(0, cut));
}

// ---------------------------------------------------------------------------
// Retry
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kEmbeddingNs = "embeddings";
constexpr std::string_view kCompletionNs = "completions";

// Runs `attempt` up to 1 + retry_budget times. `on_call` counts each attempt.
template <typename T, typename Attempt, typename OnCall>
std::optional<T> with_retries(const ProviderConfig& cfg, Attempt&& attempt, OnCall&& on_call) {
    for (std::size_t i = 0; i <= cfg.retry_budget; ++i) {
        on_call();
        try {
            return attempt();
        } catch (const ProviderFailure& f) {
            if (!f.retryable() || i == cfg.retry_budget) return std::nullopt;
        }
        if (!cfg.backoff.empty()) {
            const auto wait = cfg.backoff[std::min(i, cfg.backoff.size() - 1)];
            if (wait.count() > 0) std::this_thread::sleep_for(wait);
        }
    }
    return std::nullopt;
}

bool all_finite(const EmbeddingVector& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingClient
// ---------------------------------------------------------------------------

EmbeddingClient::EmbeddingClient(std::shared_ptr<EmbeddingBackend> backend, ProviderConfig config,
                                 std::shared_ptr<ResponseCache> cache)
    : backend_(std::move(backend)), config_(std::move(config)), cache_(std::move(cache)) {
    if (!backend_) throw Error(ErrorKind::InvalidArgument, "EmbeddingClient: no backend");
    dims_.store(config_.dims);
    config_.batch_size = std::max<std::size_t>(1, config_.batch_size);
    config_.max_in_flight = std::max<std::size_t>(1, config_.max_in_flight);
}

void EmbeddingClient::check_dims(const EmbeddingVector& v) {
    std::size_t expected = 0;
    if (dims_.compare_exchange_strong(expected, v.size())) return;
    if (expected != v.size()) {
        throw Error(ErrorKind::DimensionMismatch, "embedding has " + std::to_string(v.size()) +
                                                      " dimensions, run uses " + std::to_string(expected));
    }
}

ProviderCounters EmbeddingClient::counters() const {
    std::lock_guard lock(counters_mutex_);
    return counters_;
}

EmbedResult EmbeddingClient::embed_batch(std::span<const std::string> texts) {
    EmbedResult result;
    result.vectors.resize(texts.size());
    result.truncated.assign(texts.size(), false);
    const std::string model = backend_->model_id();

    // Unique cache misses, each with the input positions it serves.
    struct Miss {
        std::string key;
        std::string text;
        std::vector<std::size_t> slots;
    };
    std::vector<Miss> misses;
    std::unordered_map<std::string, std::size_t> miss_by_key;
    ProviderCounters local;
    local.requests = texts.size();

    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) {
            ++local.rejected;
            continue;
        }
        std::string text = truncate_utf8(texts[i], config_.max_input_chars);
        result.truncated[i] = text.size() != texts[i].size();
        std::string k = ResponseCache::key(model, text);
        if (cache_) {
            if (auto bytes = cache_->get(kEmbeddingNs, k)) {
                if (auto v = decode_vector(*bytes)) {
                    check_dims(*v);
                    result.vectors[i] = std::move(*v);
                    ++local.cache_hits;
                    continue;
                }
            }
        }
        auto [it, inserted] = miss_by_key.try_emplace(k, misses.size());
        if (inserted) misses.push_back({std::move(k), std::move(text), {}});
        misses[it->second].slots.push_back(i);
    }

    std::vector<std::optional<EmbeddingVector>> fetched(misses.size());
    std::atomic<std::size_t> calls{0};
    auto fetch_group = [&](std::size_t begin, std::size_t end) {
        std::vector<std::string> batch;
        for (std::size_t m = begin; m < end; ++m) batch.push_back(misses[m].text);
        return with_retries<std::vector<EmbeddingVector>>(
            config_,
            [&] {
                auto out = backend_->fetch(batch);
                if (out.size() != batch.size()) {
                    throw ProviderFailure("embedding response has " + std::to_string(out.size()) + " vectors for " +
                                              std::to_string(batch.size()) + " inputs",
                                          false);
                }
                for (const auto& v : out) {
                    if (v.empty() || !all_finite(v)) throw ProviderFailure("embedding response has a bad vector", false);
                }
                return out;
            },
            [&] { calls.fetch_add(1); });
    };

    const std::size_t n_batches = (misses.size() + config_.batch_size - 1) / config_.batch_size;
    parallel_for(n_batches, config_.max_in_flight, [&](std::size_t b) {
        const std::size_t begin = b * config_.batch_size;
        const std::size_t end = std::min(misses.size(), begin + config_.batch_size);
        auto out = fetch_group(begin, end);
        if (!out && end - begin > 1) {
            // Isolate the failing inputs so one bad text does not blank its batch.
            for (std::size_t m = begin; m < end; ++m) {
                if (auto single = fetch_group(m, m + 1)) fetched[m] = std::move((*single)[0]);
            }
            return;
        }
        if (!out) return;
        for (std::size_t m = begin; m < end; ++m) fetched[m] = std::move((*out)[m - begin]);
    });

    for (std::size_t m = 0; m < misses.size(); ++m) {
        if (!fetched[m]) {
            local.absent += misses[m].slots.size();
            continue;
        }
        check_dims(*fetched[m]);
        if (cache_) cache_->put(kEmbeddingNs, misses[m].key, encode_vector(*fetched[m]));
        for (std::size_t slot : misses[m].slots) result.vectors[slot] = *fetched[m];
    }
    local.network_fetches = calls.load();

    std::lock_guard lock(counters_mutex_);
    counters_.requests += local.requests;
    counters_.cache_hits += local.cache_hits;
    counters_.network_fetches += local.network_fetches;
    counters_.absent += local.absent;
    counters_.rejected += local.rejected;
    return result;
}

// ---------------------------------------------------------------------------
// JudgeClient
// ---------------------------------------------------------------------------

JudgeClient::JudgeClient(std::shared_ptr<CompletionBackend> backend, ProviderConfig config,
                         std::shared_ptr<ResponseCache> cache)
    : backend_(std::move(backend)), config_(std::move(config)), cache_(std::move(cache)) {
    if (!backend_) throw Error(ErrorKind::InvalidArgument, "JudgeClient: no backend");
}

ProviderCounters JudgeClient::counters() const {
    std::lock_guard lock(counters_mutex_);
    return counters_;
}

std::optional<std::string> JudgeClient::complete_judgement(const std::string& prompt) {
    {
        std::lock_guard lock(counters_mutex_);
        ++counters_.requests;
    }
    if (prompt.empty()) {
        std::lock_guard lock(counters_mutex_);
        ++counters_.rejected;
        return std::nullopt;
    }
    const std::string k = ResponseCache::key(backend_->model_id(), prompt);
    if (cache_) {
        if (auto hit = cache_->get(kCompletionNs, k)) {
            std::lock_guard lock(counters_mutex_);
            ++counters_.cache_hits;
            return hit;
        }
    }
    auto out = with_retries<std::string>(
        config_, [&] { return backend_->complete(prompt); },
        [&] {
            std::lock_guard lock(counters_mutex_);
            ++counters_.network_fetches;
        });
    if (!out) {
        std::lock_guard lock(counters_mutex_);
        ++counters_.absent;
        return std::nullopt;
    }
    if (cache_) cache_->put(kCompletionNs, k, *out);
    return out;
}

// ---------------------------------------------------------------------------
// Mock provider
// ---------------------------------------------------------------------------

EmbeddingVector hashed_embedding(std::string_view text, std::size_t dims) {
    if (dims == 0) throw Error(ErrorKind::InvalidArgument, "hashed_embedding: dims must be positive");
    EmbeddingVector v(dims, 0.0f);
    const TokenSequence tokens = tokenize(text);
    const Stoplist& stop = Stoplist::english();
    bool any_content = false;
    for (const auto& t : tokens) any_content = any_content || !stop.contains(t);
    for (const auto& t : tokens) {
        if (any_content && stop.contains(t)) continue;
        const std::uint64_t h = fnv1a64(t);
        v[h % dims] += (h >> 63) ? -1.0f : 1.0f;
    }
    double norm = 0.0;
    for (float x : v) norm += static_cast<double>(x) * x;
    if (norm == 0.0) {
        v[fnv1a64(text) % dims] = 1.0f;
        return v;
    }
    const double inv = 1.0 / std::sqrt(norm);
    for (float& x : v) x = static_cast<float>(x * inv);
    return v;
}

MockProvider::MockProvider(Script script) : script_(std::move(script)) {
    failures_left_.store(script_.transient_failures);
}

std::shared_ptr<MockProvider> MockProvider::from_fixture(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, "mock fixture " + path.string() + ": " + e.what());
    }
    Script s;
    s.model = j.value("model", std::string("mock"));
    s.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
    s.transient_failures = j.value("transient_failures", std::size_t{0});
    if (auto e = j.find("embedding"); e != j.end()) {
        s.dims = e->value("dims", std::size_t{64});
        if (auto vs = e->find("vectors"); vs != e->end()) {
            for (auto it = vs->begin(); it != vs->end(); ++it) {
                s.vectors.emplace_back(it.key(), it.value().get<EmbeddingVector>());
            }
        }
        if (auto f = e->find("fail"); f != e->end()) s.fail_texts = f->get<std::vector<std::string>>();
    }
    if (auto c = j.find("completion"); c != j.end()) {
        if (auto rules = c->find("rules"); rules != c->end()) {
            for (const auto& r : *rules) s.rules.emplace_back(r.at("contains").get<std::string>(), r.at("output").get<std::string>());
        }
        if (auto seq = c->find("sequence"); seq != c->end()) s.sequence = seq->get<std::vector<std::string>>();
        if (auto d = c->find("default"); d != c->end()) s.default_output = d->get<std::string>();
    }
    return std::make_shared<MockProvider>(std::move(s));
}

void MockProvider::enter() {
    ++calls_;
    const std::size_t now = ++in_flight_;
    std::size_t seen = max_concurrent_.load();
    while (now > seen && !max_concurrent_.compare_exchange_weak(seen, now)) {
    }
    if (script_.latency.count() > 0) std::this_thread::sleep_for(script_.latency);
}

void MockProvider::leave() { --in_flight_; }

namespace {

struct Leave {
    std::function<void()> fn;
    ~Leave() { fn(); }
};

bool take_failure(std::atomic<std::size_t>& left) {
    std::size_t n = left.load();
    while (n > 0) {
        if (left.compare_exchange_weak(n, n - 1)) return true;
    }
    return false;
}

}  // namespace

std::vector<EmbeddingVector> MockProvider::fetch(std::span<const std::string> texts) {
    enter();
    Leave guard{[this] { leave(); }};
    if (take_failure(failures_left_)) throw ProviderFailure("mock transient failure", true);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        if (std::find(script_.fail_texts.begin(), script_.fail_texts.end(), t) != script_.fail_texts.end()) {
            throw ProviderFailure("mock failure for scripted text", true);
        }
        auto it = std::find_if(script_.vectors.begin(), script_.vectors.end(), [&](const auto& p) { return p.first == t; });
        out.push_back(it != script_.vectors.end() ? it->second : hashed_embedding(t, script_.dims));
    }
    return out;
}

std::string MockProvider::complete(const std::string& prompt) {
    enter();
    Leave guard{[this] { leave(); }};
    if (take_failure(failures_left_)) throw ProviderFailure("mock transient failure", true);
    for (const auto& [needle, output] : script_.rules) {
        if (prompt.find(needle) != std::string::npos) return output;
    }
    const std::size_t pos = sequence_pos_.fetch_add(1);
    if (pos < script_.sequence.size()) return script_.sequence[pos];
    if (script_.default_output) return *script_.default_output;
    throw ProviderFailure("mock has no scripted output", false);
}

}  // namespace threadscope

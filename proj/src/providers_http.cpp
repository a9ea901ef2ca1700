// HTTP adapters for hosted embedding and completion APIs. The credential is
// read from its environment variable per request and never retained.

#include "threadscope/error.hpp"
#include "threadscope/providers.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

namespace threadscope {

namespace {

using nlohmann::json;

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidArgument, "provider endpoint needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        e.prefix = url.substr(path_start);
        while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
    }
    return e;
}

std::string credential(const ProviderConfig& cfg) {
    if (cfg.credential_env.empty()) return {};
    const char* v = std::getenv(cfg.credential_env.c_str());
    if (v == nullptr || *v == '\0') {
        throw ProviderFailure("credential variable " + cfg.credential_env + " is not set", false);
    }
    return v;
}

class HttpBackendBase {
protected:
    explicit HttpBackendBase(ProviderConfig cfg) : cfg_(std::move(cfg)), endpoint_(split_endpoint(cfg_.endpoint)) {}

    std::string post(const std::string& path, const httplib::Headers& headers, const json& body) const {
        httplib::Client client(endpoint_.origin);
        client.set_connection_timeout(cfg_.timeout);
        client.set_read_timeout(cfg_.timeout);
        client.set_write_timeout(cfg_.timeout);
        auto res = client.Post(endpoint_.prefix + path, headers, body.dump(), "application/json");
        if (!res) throw ProviderFailure("request failed: " + httplib::to_string(res.error()), true);
        if (res->status == 429 || res->status >= 500) {
            throw ProviderFailure("provider returned HTTP " + std::to_string(res->status), true);
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProviderFailure("provider returned HTTP " + std::to_string(res->status), false);
        }
        return res->body;
    }

    ProviderConfig cfg_;
    Endpoint endpoint_;
};

class OpenAiEmbedding : public EmbeddingBackend, HttpBackendBase {
public:
    explicit OpenAiEmbedding(ProviderConfig cfg) : HttpBackendBase(std::move(cfg)) {}

    std::string model_id() const override { return "openai/" + cfg_.model; }

    std::vector<EmbeddingVector> fetch(std::span<const std::string> texts) override {
        json body = {{"model", cfg_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
        if (cfg_.dims > 0) body["dimensions"] = cfg_.dims;
        httplib::Headers headers;
        const std::string key = credential(cfg_);
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
        const std::string raw = post("/v1/embeddings", headers, body);
        std::vector<EmbeddingVector> out(texts.size());
        try {
            const json j = json::parse(raw);
            const auto& data = j.at("data");
            if (data.size() != texts.size()) throw ProviderFailure("embedding response size mismatch", false);
            std::size_t pos = 0;
            for (const auto& item : data) {
                const std::size_t idx = item.value("index", pos);
                if (idx >= out.size()) throw ProviderFailure("embedding response index out of range", false);
                out[idx] = item.at("embedding").get<EmbeddingVector>();
                ++pos;
            }
        } catch (const json::exception&) {
            throw ProviderFailure("malformed embedding response", false);
        }
        return out;
    }
};

class OpenAiCompletion : public CompletionBackend, HttpBackendBase {
public:
    explicit OpenAiCompletion(ProviderConfig cfg) : HttpBackendBase(std::move(cfg)) {}

    std::string model_id() const override { return "openai/" + cfg_.model; }

    std::string complete(const std::string& prompt) override {
        const json body = {{"model", cfg_.model},
                           {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                           {"temperature", cfg_.temperature},
                           {"max_tokens", cfg_.max_tokens}};
        httplib::Headers headers;
        const std::string key = credential(cfg_);
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
        const std::string raw = post("/v1/chat/completions", headers, body);
        const json j = json::parse(raw, nullptr, false);
        if (j.is_discarded()) return raw;
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            return raw;
        }
    }
};

class AnthropicCompletion : public CompletionBackend, HttpBackendBase {
public:
    explicit AnthropicCompletion(ProviderConfig cfg) : HttpBackendBase(std::move(cfg)) {}

    std::string model_id() const override { return "anthropic/" + cfg_.model; }

    std::string complete(const std::string& prompt) override {
        const json body = {{"model", cfg_.model},
                           {"max_tokens", cfg_.max_tokens},
                           {"temperature", cfg_.temperature},
                           {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
        httplib::Headers headers{{"anthropic-version", "2023-06-01"}};
        const std::string key = credential(cfg_);
        if (!key.empty()) headers.emplace("x-api-key", key);
        const std::string raw = post("/v1/messages", headers, body);
        const json j = json::parse(raw, nullptr, false);
        if (j.is_discarded() || !j.contains("content") || !j["content"].is_array()) return raw;
        std::string text;
        for (const auto& block : j["content"]) {
            if (block.value("type", "") == "text") text += block.value("text", "");
        }
        return text;
    }
};

}  // namespace

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const ProviderConfig& config) {
    if (config.kind == "mock") {
        auto mock = MockProvider::from_fixture(config.endpoint);
        struct Shared : EmbeddingBackend {
            std::shared_ptr<MockProvider> p;
            std::string model_id() const override { return p->model_id(); }
            std::vector<EmbeddingVector> fetch(std::span<const std::string> t) override { return p->fetch(t); }
        };
        auto s = std::make_unique<Shared>();
        s->p = std::move(mock);
        return s;
    }
    if (config.kind == "openai") return std::make_unique<OpenAiEmbedding>(config);
    throw Error(ErrorKind::InvalidArgument, "provider kind '" + config.kind + "' does not offer embeddings");
}

std::unique_ptr<CompletionBackend> make_completion_backend(const ProviderConfig& config) {
    if (config.kind == "mock") {
        auto mock = MockProvider::from_fixture(config.endpoint);
        struct Shared : CompletionBackend {
            std::shared_ptr<MockProvider> p;
            std::string model_id() const override { return p->model_id(); }
            std::string complete(const std::string& prompt) override { return p->complete(prompt); }
        };
        auto s = std::make_unique<Shared>();
        s->p = std::move(mock);
        return s;
    }
    if (config.kind == "openai") return std::make_unique<OpenAiCompletion>(config);
    if (config.kind == "anthropic") return std::make_unique<AnthropicCompletion>(config);
    throw Error(ErrorKind::InvalidArgument, "provider kind '" + config.kind + "' does not offer completions");
}

}  // namespace threadscope

#pragma once
// Shared helpers for the test binaries: scratch directories, fixture paths
// and small corpus builders.

#include "threadscope/corpus.hpp"
#include "threadscope/util.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace threadscope::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("threadscope-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(THREADSCOPE_TEST_DATA) / name;
}

inline std::filesystem::path config_path(const std::string& name) {
    return std::filesystem::path(THREADSCOPE_CONFIG_DIR) / name;
}

inline Timestamp at_minute(int minute) {
    return Timestamp{parse_timestamp("2026-01-28T00:00:00Z")->micros + std::int64_t{minute} * 60'000'000};
}

inline Post make_post(std::string id, std::string title, std::string content = {}) {
    Post p;
    p.id = std::move(id);
    p.title = std::move(title);
    p.content = std::move(content);
    p.submolt = "general";
    p.author_id = "author";
    p.created_at = at_minute(0);
    return p;
}

inline Comment make_comment(std::string id, std::string post_id, std::string content, std::string author = "agent",
                            std::optional<std::string> parent = std::nullopt, int minute = 1) {
    Comment c;
    c.id = std::move(id);
    c.post_id = std::move(post_id);
    c.parent_id = std::move(parent);
    c.author_id = std::move(author);
    c.created_at = at_minute(minute);
    c.content = std::move(content);
    return c;
}

/// Corpus with depths resolved.
inline Corpus make_corpus(std::vector<Post> posts, std::vector<Comment> comments,
                          std::vector<AgentProfile> agents = {}) {
    return build_corpus(std::move(posts), std::move(comments), std::move(agents));
}

}  // namespace threadscope::testing

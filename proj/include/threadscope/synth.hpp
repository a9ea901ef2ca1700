#pragma once
// Seeded synthetic corpora with planted agent archetypes. Agent ids carry the
// archetype ("agent-ontopic-0003"), so every metric can be scored against
// ground truth.

#include "threadscope/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace threadscope {

class KeyValueDoc;

enum class Archetype { Template, Echo, OnTopic, OffTopic, Replier };

inline constexpr Archetype kAllArchetypes[] = {Archetype::Template, Archetype::Echo, Archetype::OnTopic,
                                               Archetype::OffTopic, Archetype::Replier};

/// "template", "echo", "ontopic", "offtopic", "replier".
std::string_view to_string(Archetype a);
std::optional<Archetype> parse_archetype(std::string_view name);
/// Archetype encoded in a generated agent id.
std::optional<Archetype> archetype_of(std::string_view agent_id);

enum class CommentCountMode { Fixed, Geometric };

struct SynthConfig {
    std::uint64_t seed = 42;
    std::size_t n_posts = 100;
    CommentCountMode count_mode = CommentCountMode::Fixed;
    double comments_per_post = 10;  // exact count (fixed) or mean (geometric, >= 1)
    std::size_t comments_cap = 200;
    std::size_t n_agents = 20;

    double frac_template = 0.2;
    double frac_echo = 0.2;
    double frac_on_topic = 0.2;
    double frac_off_topic = 0.2;
    double frac_replier = 0.2;
    double replier_nest_prob = 1.0;

    // Vocabulary. Topic pools are per post and disjoint from each other, from
    // the shared common pool and from the off-topic pool.
    std::size_t topic_pool_size = 24;
    std::size_t common_pool_size = 400;
    std::size_t off_topic_pool_size = 5000;
    std::size_t title_words = 6;
    std::size_t post_words = 30;
    double post_common_share = 0.2;
    std::size_t comment_words_min = 15;
    std::size_t comment_words_max = 30;
    std::size_t template_words = 40;
    double on_topic_share = 0.6;

    double tie_probability = 0.02;  // a comment reuses the previous timestamp
    std::string start_time = "2026-01-28T00:00:00Z";

    double fraction(Archetype a) const;
    /// Throws Error(InvalidArgument) on fractions that do not sum to 1 or
    /// degenerate sizes.
    void validate() const;

    static SynthConfig from_document(const KeyValueDoc& doc);
    static SynthConfig read(const std::filesystem::path& path);
    KeyValueDoc to_document() const;
};

/// Deterministic pseudo-word `index` of the shared word space: three or four
/// consonant-vowel syllables, distinct for distinct indexes. Throws
/// Error(InvalidArgument) past the end of the space.
std::string pseudo_word(std::uint64_t index);

/// Fully determined by the config. Comment ids increase in generation order,
/// so equal timestamps break ties in generation order.
Corpus generate_corpus(const SynthConfig& config);

}  // namespace threadscope

#include "threadscope/synth.hpp"

#include "threadscope/error.hpp"
#include "threadscope/textproc.hpp"
#include "threadscope/util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

namespace threadscope {

std::string_view to_string(Archetype a) {
    switch (a) {
        case Archetype::Template: return "template";
        case Archetype::Echo: return "echo";
        case Archetype::OnTopic: return "ontopic";
        case Archetype::OffTopic: return "offtopic";
        case Archetype::Replier: return "replier";
    }
    return "template";
}

std::optional<Archetype> parse_archetype(std::string_view name) {
    for (Archetype a : kAllArchetypes) {
        if (name == to_string(a)) return a;
    }
    return std::nullopt;
}

std::optional<Archetype> archetype_of(std::string_view agent_id) {
    constexpr std::string_view prefix = "agent-";
    if (agent_id.substr(0, prefix.size()) != prefix) return std::nullopt;
    const std::string_view rest = agent_id.substr(prefix.size());
    return parse_archetype(rest.substr(0, rest.find('-')));
}

double SynthConfig::fraction(Archetype a) const {
    switch (a) {
        case Archetype::Template: return frac_template;
        case Archetype::Echo: return frac_echo;
        case Archetype::OnTopic: return frac_on_topic;
        case Archetype::OffTopic: return frac_off_topic;
        case Archetype::Replier: return frac_replier;
    }
    return 0.0;
}

void SynthConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "synth config: " + what); };
    double sum = 0.0;
    std::size_t active = 0;
    for (Archetype a : kAllArchetypes) {
        const double f = fraction(a);
        if (!(f >= 0.0 && f <= 1.0)) fail(fmt::format("fraction for {} must be in [0, 1]", to_string(a)));
        sum += f;
        if (f > 0.0) ++active;
    }
    if (std::fabs(sum - 1.0) > 1e-9) fail(fmt::format("archetype fractions sum to {}, not 1", sum));
    if (n_agents < active) fail("n_agents is smaller than the number of archetypes in use");
    if (n_posts == 0) fail("n_posts must be positive");
    if (count_mode == CommentCountMode::Fixed && (comments_per_post < 0 || comments_per_post != std::floor(comments_per_post))) {
        fail("comments_per_post must be a non-negative integer in fixed mode");
    }
    if (count_mode == CommentCountMode::Geometric && comments_per_post < 1.0) fail("geometric mean must be >= 1");
    if (topic_pool_size == 0 || common_pool_size == 0 || off_topic_pool_size == 0) fail("pools must be non-empty");
    if (title_words == 0) fail("title_words must be positive");
    if (comment_words_min == 0 || comment_words_min > comment_words_max) fail("comment word range is empty");
    if (template_words == 0) fail("template_words must be positive");
    for (double p : {replier_nest_prob, post_common_share, on_topic_share, tie_probability}) {
        if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must be in [0, 1]");
    }
    if (!parse_timestamp(start_time)) fail("start_time is not a timestamp");
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorKind::InvalidArgument, "synth config: bad value for " + key + ": '" + text + "'");
    }
    return v;
}

}  // namespace

SynthConfig SynthConfig::from_document(const KeyValueDoc& doc) {
    SynthConfig c;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto size_field = [](std::size_t& f) -> Setter {
        return [&f](const std::string& k, const std::string& v) { f = parse_number<std::size_t>(k, v); };
    };
    auto real_field = [](double& f) -> Setter {
        return [&f](const std::string& k, const std::string& v) { f = parse_number<double>(k, v); };
    };
    const std::vector<std::pair<std::string, Setter>> fields = {
        {"seed", [&c](const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
        {"n_posts", size_field(c.n_posts)},
        {"comments_per_post_mode",
         [&c](const std::string& k, const std::string& v) {
             if (v == "fixed") {
                 c.count_mode = CommentCountMode::Fixed;
             } else if (v == "geometric") {
                 c.count_mode = CommentCountMode::Geometric;
             } else {
                 throw Error(ErrorKind::InvalidArgument, "synth config: " + k + " must be fixed or geometric");
             }
         }},
        {"comments_per_post", real_field(c.comments_per_post)},
        {"comments_cap", size_field(c.comments_cap)},
        {"n_agents", size_field(c.n_agents)},
        {"frac_template", real_field(c.frac_template)},
        {"frac_echo", real_field(c.frac_echo)},
        {"frac_on_topic", real_field(c.frac_on_topic)},
        {"frac_off_topic", real_field(c.frac_off_topic)},
        {"frac_replier", real_field(c.frac_replier)},
        {"replier_nest_prob", real_field(c.replier_nest_prob)},
        {"topic_pool_size", size_field(c.topic_pool_size)},
        {"common_pool_size", size_field(c.common_pool_size)},
        {"off_topic_pool_size", size_field(c.off_topic_pool_size)},
        {"title_words", size_field(c.title_words)},
        {"post_words", size_field(c.post_words)},
        {"post_common_share", real_field(c.post_common_share)},
        {"comment_words_min", size_field(c.comment_words_min)},
        {"comment_words_max", size_field(c.comment_words_max)},
        {"template_words", size_field(c.template_words)},
        {"on_topic_share", real_field(c.on_topic_share)},
        {"tie_probability", real_field(c.tie_probability)},
        {"start_time", [&c](const std::string&, const std::string& v) { c.start_time = v; }},
    };
    for (const auto& [key, value] : doc.entries()) {
        const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == key; });
        if (it == fields.end()) throw Error(ErrorKind::InvalidArgument, "synth config: unknown key '" + key + "'");
        it->second(key, value);
    }
    c.validate();
    return c;
}

SynthConfig SynthConfig::read(const std::filesystem::path& path) { return from_document(KeyValueDoc::read(path)); }

KeyValueDoc SynthConfig::to_document() const {
    KeyValueDoc d;
    d.set("seed", seed);
    d.set("n_posts", static_cast<std::uint64_t>(n_posts));
    d.set("comments_per_post_mode", count_mode == CommentCountMode::Fixed ? "fixed" : "geometric");
    d.set("comments_per_post", comments_per_post);
    d.set("comments_cap", static_cast<std::uint64_t>(comments_cap));
    d.set("n_agents", static_cast<std::uint64_t>(n_agents));
    d.set("frac_template", frac_template);
    d.set("frac_echo", frac_echo);
    d.set("frac_on_topic", frac_on_topic);
    d.set("frac_off_topic", frac_off_topic);
    d.set("frac_replier", frac_replier);
    d.set("replier_nest_prob", replier_nest_prob);
    d.set("topic_pool_size", static_cast<std::uint64_t>(topic_pool_size));
    d.set("common_pool_size", static_cast<std::uint64_t>(common_pool_size));
    d.set("off_topic_pool_size", static_cast<std::uint64_t>(off_topic_pool_size));
    d.set("title_words", static_cast<std::uint64_t>(title_words));
    d.set("post_words", static_cast<std::uint64_t>(post_words));
    d.set("post_common_share", post_common_share);
    d.set("comment_words_min", static_cast<std::uint64_t>(comment_words_min));
    d.set("comment_words_max", static_cast<std::uint64_t>(comment_words_max));
    d.set("template_words", static_cast<std::uint64_t>(template_words));
    d.set("on_topic_share", on_topic_share);
    d.set("tie_probability", tie_probability);
    d.set("start_time", start_time);
    return d;
}

namespace {

constexpr std::string_view kConsonants = "bdfghjklmnprstvz";  // 16
constexpr std::string_view kVowels = "aeiou";                // 5
constexpr std::uint64_t kSyllables = 16 * 5;
constexpr std::uint64_t kShortSpace = kSyllables * kSyllables * kSyllables;  // three syllables
constexpr std::uint64_t kLongSpace = kShortSpace * kSyllables;               // four syllables
constexpr std::uint64_t kWordSpace = kShortSpace + kLongSpace;
// Odd and not a multiple of 5, hence a unit modulo both space sizes.
constexpr std::uint64_t kScramble = 1'000'003;

}  // namespace

std::string pseudo_word(std::uint64_t index) {
    if (index >= kWordSpace) throw Error(ErrorKind::InvalidArgument, "pseudo_word: index outside the word space");
    int syllables = 3;
    std::uint64_t space = kShortSpace;
    if (index >= kShortSpace) {
        index -= kShortSpace;
        syllables = 4;
        space = kLongSpace;
    }
    // Bijective scramble so neighbouring indexes share no suffix.
    std::uint64_t code = (index * kScramble) % space;
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        const std::uint64_t syl = code % kSyllables;
        code /= kSyllables;
        w.push_back(kConsonants[syl / 5]);
        w.push_back(kVowels[syl % 5]);
    }
    return w;
}

namespace {

// Word-space layout: [off-topic pool][common pool][topic pool of post 0][post 1]...
class Vocabulary {
public:
    explicit Vocabulary(const SynthConfig& c) : c_(c) {
        const std::uint64_t needed = c.off_topic_pool_size + c.common_pool_size +
                                     static_cast<std::uint64_t>(c.n_posts) * c.topic_pool_size;
        if (needed > kWordSpace) throw Error(ErrorKind::InvalidArgument, "synth config: vocabulary exceeds word space");
    }
    std::string off_topic(Rng& r) const { return pseudo_word(r.below(c_.off_topic_pool_size)); }
    std::string common(Rng& r) const { return pseudo_word(c_.off_topic_pool_size + r.below(c_.common_pool_size)); }
    std::string topic(std::size_t post, Rng& r) const {
        return pseudo_word(c_.off_topic_pool_size + c_.common_pool_size + post * c_.topic_pool_size +
                           r.below(c_.topic_pool_size));
    }

private:
    const SynthConfig& c_;
};

struct Agent {
    std::string id;
    Archetype archetype;
    std::string template_text;
};

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

// Agents per archetype by largest remainder, at least one per archetype in use.
std::vector<std::size_t> allocate_agents(const SynthConfig& c) {
    std::vector<std::size_t> counts(std::size(kAllArchetypes), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double f = c.fraction(kAllArchetypes[i]);
        if (f <= 0.0) continue;
        const double exact = f * static_cast<double>(c.n_agents);
        counts[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(exact)));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < c.n_agents && !remainders.empty(); ++k, ++assigned) {
        ++counts[remainders[k % remainders.size()].second];
    }
    return counts;
}

std::size_t comment_count(const SynthConfig& c, Rng& rng) {
    if (c.count_mode == CommentCountMode::Fixed) {
        return std::min(c.comments_cap, static_cast<std::size_t>(c.comments_per_post));
    }
    // Geometric on {1, 2, ...} with the configured mean.
    const double p_more = 1.0 - 1.0 / c.comments_per_post;
    std::size_t n = 1;
    while (n < c.comments_cap && rng.bernoulli(p_more)) ++n;
    return n;
}

}  // namespace

Corpus generate_corpus(const SynthConfig& config) {
    config.validate();
    const Vocabulary vocab(config);
    Rng rng(derive_seed(config.seed, "synth"));

    const auto per_archetype = allocate_agents(config);
    std::vector<Agent> agents;
    std::vector<std::vector<std::size_t>> agents_of(per_archetype.size());
    for (std::size_t a = 0; a < per_archetype.size(); ++a) {
        for (std::size_t k = 0; k < per_archetype[a]; ++k) {
            Agent agent;
            agent.archetype = kAllArchetypes[a];
            agent.id = fmt::format("agent-{}-{:04}", to_string(agent.archetype), k);
            if (agent.archetype == Archetype::Template) {
                Rng trng(derive_seed(config.seed, agent.id));
                std::vector<std::string> words;
                for (std::size_t w = 0; w < config.template_words; ++w) words.push_back(vocab.common(trng));
                agent.template_text = join(words);
            }
            agents_of[a].push_back(agents.size());
            agents.push_back(std::move(agent));
        }
    }
    // Cumulative archetype thresholds over those in use.
    std::vector<std::pair<double, std::size_t>> cumulative;
    double acc = 0.0;
    for (std::size_t a = 0; a < per_archetype.size(); ++a) {
        if (per_archetype[a] == 0) continue;
        acc += config.fraction(kAllArchetypes[a]);
        cumulative.emplace_back(acc, a);
    }
    auto pick_archetype = [&]() {
        const double u = rng.unit();
        for (const auto& [threshold, a] : cumulative) {
            if (u < threshold) return a;
        }
        return cumulative.back().second;
    };

    const Timestamp start = *parse_timestamp(config.start_time);
    constexpr std::int64_t kSecond = 1'000'000;
    std::vector<Post> posts;
    std::vector<Comment> comments;
    std::uint64_t next_comment = 0;

    for (std::size_t p = 0; p < config.n_posts; ++p) {
        Post post;
        post.id = fmt::format("post-{:07}", p);
        post.submolt = "general";
        post.author_id = agents[rng.below(agents.size())].id;
        post.created_at = Timestamp{start.micros + static_cast<std::int64_t>(p) * 3600 * kSecond};
        std::vector<std::string> title, body;
        for (std::size_t w = 0; w < config.title_words; ++w) title.push_back(vocab.topic(p, rng));
        for (std::size_t w = 0; w < config.post_words; ++w) {
            body.push_back(rng.bernoulli(config.post_common_share) ? vocab.common(rng) : vocab.topic(p, rng));
        }
        post.title = join(title);
        post.content = join(body);

        const std::size_t n = comment_count(config, rng);
        std::vector<std::size_t> slot_archetype(n);
        for (auto& a : slot_archetype) a = pick_archetype();
        // A reply needs an earlier comment, so slot 0 never holds a replier.
        const auto replier = static_cast<std::size_t>(Archetype::Replier);
        if (n > 0 && slot_archetype[0] == replier) {
            const auto other = std::find_if(slot_archetype.begin(), slot_archetype.end(),
                                            [&](std::size_t a) { return a != replier; });
            if (other != slot_archetype.end()) std::swap(slot_archetype[0], *other);
        }

        const std::size_t first_comment = comments.size();
        Timestamp t = post.created_at;
        for (std::size_t k = 0; k < n; ++k) {
            const Agent& agent = agents[agents_of[slot_archetype[k]][rng.below(agents_of[slot_archetype[k]].size())]];
            Comment c;
            c.id = fmt::format("c{:09}", next_comment++);
            c.post_id = post.id;
            c.author_id = agent.id;
            if (k == 0 || !rng.bernoulli(config.tie_probability)) t.micros += 60 * kSecond;
            c.created_at = t;

            const std::size_t len =
                config.comment_words_min + rng.below(config.comment_words_max - config.comment_words_min + 1);
            std::vector<std::string> words;
            switch (agent.archetype) {
                case Archetype::Template:
                    c.content = agent.template_text;
                    break;
                case Archetype::Echo:
                    if (k > 0) {
                        c.content = comments[first_comment].content;
                    } else {
                        for (std::size_t w = 0; w < len; ++w) words.push_back(vocab.common(rng));
                        c.content = join(words);
                    }
                    break;
                case Archetype::OnTopic:
                    for (std::size_t w = 0; w < len; ++w) {
                        words.push_back(rng.bernoulli(config.on_topic_share) ? vocab.topic(p, rng) : vocab.common(rng));
                    }
                    c.content = join(words);
                    break;
                case Archetype::OffTopic:
                    for (std::size_t w = 0; w < len; ++w) words.push_back(vocab.off_topic(rng));
                    c.content = join(words);
                    break;
                case Archetype::Replier: {
                    if (k > 0 && rng.bernoulli(config.replier_nest_prob)) {
                        const Comment& parent = comments[first_comment + rng.below(k)];
                        c.parent_id = parent.id;
                        const auto parent_words = content_words(tokenize(parent.content)).words();
                        // The first word always quotes the parent.
                        for (std::size_t w = 0; w < len; ++w) {
                            if (!parent_words.empty() && (w == 0 || rng.bernoulli(0.5))) {
                                words.push_back(parent_words[rng.below(parent_words.size())]);
                            } else {
                                words.push_back(vocab.common(rng));
                            }
                        }
                    } else {
                        for (std::size_t w = 0; w < len; ++w) words.push_back(vocab.common(rng));
                    }
                    c.content = join(words);
                    break;
                }
            }
            comments.push_back(std::move(c));
        }
        posts.push_back(std::move(post));
    }

    std::vector<AgentProfile> profiles;
    profiles.reserve(agents.size());
    for (const auto& a : agents) profiles.push_back({a.id, a.id, std::string("synthetic ") + std::string(to_string(a.archetype))});
    MergeReport report;
    report.sources.push_back(fmt::format("synth:seed={}", config.seed));
    return build_corpus(std::move(posts), std::move(comments), std::move(profiles), std::move(report));
}

}  // namespace threadscope

#include "threadscope/saturation.hpp"

#include "threadscope/corpus.hpp"
#include "threadscope/error.hpp"
#include "threadscope/util.hpp"

#include <algorithm>

namespace threadscope {

std::optional<double> lexical_ig(const TokenSequence& comment, const NgramSet& accumulated) {
    const NgramSet own = ngram_set(comment, accumulated.n);
    if (own.size() == 0) return std::nullopt;
    std::size_t novel = 0;
    for (const auto& g : own.grams) {
        if (!accumulated.contains(g)) ++novel;
    }
    return static_cast<double>(novel) / static_cast<double>(own.size());
}

std::optional<double> compression_ig(std::string_view accumulated_text, std::string_view comment) {
    if (comment.empty()) return std::nullopt;
    const double before = static_cast<double>(compressed_len(accumulated_text));
    const double after = static_cast<double>(compressed_len(concat(accumulated_text, comment)));
    return (after - before) / static_cast<double>(compressed_len(comment));
}

PostSaturation post_saturation(std::span<const std::string> comments, std::size_t max_position) {
    if (comments.empty()) throw Error(ErrorKind::EmptyInput, "post_saturation: no comments");
    PostSaturation out;
    const std::size_t limit = std::min(comments.size(), max_position);
    out.positions.reserve(limit);

    NgramSet unigrams;
    unigrams.n = 1;
    NgramSet bigrams;
    bigrams.n = 2;
    std::string accumulated;
    std::size_t c_accumulated = compressed_len(accumulated);

    for (std::size_t k = 0; k < limit; ++k) {
        const std::string& text = comments[k];
        const TokenSequence tokens = tokenize(text);
        PositionGain g;
        g.position = k;
        g.unigram_gain = lexical_ig(tokens, unigrams);
        g.bigram_gain = lexical_ig(tokens, bigrams);
        if (!text.empty()) {
            std::string next = concat(accumulated, text);
            const std::size_t c_next = compressed_len(next);
            g.compression_gain = (static_cast<double>(c_next) - static_cast<double>(c_accumulated)) /
                                 static_cast<double>(compressed_len(text));
            accumulated = std::move(next);
            c_accumulated = c_next;
        }
        if (k == 0) {
            if (g.unigram_gain) g.unigram_gain = 1.0;
            if (g.bigram_gain) g.bigram_gain = 1.0;
            if (g.compression_gain) g.compression_gain = 1.0;
        }
        add_ngrams(tokens, unigrams);
        add_ngrams(tokens, bigrams);
        g.cumulative_vocab = unigrams.size();
        out.positions.push_back(std::move(g));
    }
    return out;
}

SaturationCurve aggregate_post_saturations(std::span<const PostSaturation> posts, std::size_t max_position) {
    struct Acc {
        double uni = 0, bi = 0, comp = 0, vocab = 0;
        std::size_t n = 0, n_uni = 0, n_bi = 0, n_comp = 0;
    };
    std::vector<Acc> acc(max_position);
    for (const auto& post : posts) {
        for (const auto& g : post.positions) {
            if (g.position >= max_position) break;
            Acc& a = acc[g.position];
            ++a.n;
            a.vocab += static_cast<double>(g.cumulative_vocab);
            if (g.unigram_gain) {
                a.uni += *g.unigram_gain;
                ++a.n_uni;
            }
            if (g.bigram_gain) {
                a.bi += *g.bigram_gain;
                ++a.n_bi;
            }
            if (g.compression_gain) {
                a.comp += *g.compression_gain;
                ++a.n_comp;
            }
        }
    }
    SaturationCurve curve;
    curve.max_position = max_position;
    curve.n_sampled_posts = posts.size();
    for (std::size_t k = 0; k < max_position; ++k) {
        const Acc& a = acc[k];
        if (a.n == 0) break;
        CurvePoint p;
        p.position = k;
        p.n_posts = a.n;
        p.n_unigram = a.n_uni;
        p.n_bigram = a.n_bi;
        p.n_compression = a.n_comp;
        p.cumulative_vocab = a.vocab / static_cast<double>(a.n);
        if (k == 0) {
            p.unigram_gain = p.bigram_gain = p.compression_gain = 1.0;
        } else {
            p.unigram_gain = a.n_uni ? a.uni / static_cast<double>(a.n_uni) : 0.0;
            p.bigram_gain = a.n_bi ? a.bi / static_cast<double>(a.n_bi) : 0.0;
            p.compression_gain = a.n_comp ? a.comp / static_cast<double>(a.n_comp) : 0.0;
        }
        curve.points.push_back(p);
    }
    return curve;
}

SaturationCurve aggregate_curves(const Corpus& corpus, const SaturationOptions& options) {
    std::vector<std::size_t> qualifying;
    for (std::size_t i = 0; i < corpus.posts().size(); ++i) {
        if (corpus.comments_of_post(i).size() >= options.min_comments) qualifying.push_back(i);
    }
    if (qualifying.empty()) {
        throw Error(ErrorKind::EmptyInput, "aggregate_curves: no post has the minimum number of comments");
    }
    Rng rng(derive_seed(options.seed, "saturation-post-sample"));
    const auto picks = sample_indices(qualifying.size(), options.sample_size, rng);

    std::vector<PostSaturation> per_post(picks.size());
    parallel_for(picks.size(), options.jobs, [&](std::size_t i) {
        const std::size_t post_idx = qualifying[picks[i]];
        const auto idx = corpus.comments_of_post(post_idx);
        const std::size_t limit = std::min(idx.size(), options.max_position);
        std::vector<std::string> texts;
        texts.reserve(limit);
        for (std::size_t k = 0; k < limit; ++k) texts.push_back(corpus.comments()[idx[k]].content);
        per_post[i] = post_saturation(texts, options.max_position);
        per_post[i].post_id = corpus.posts()[post_idx].id;
    });
    SaturationCurve curve = aggregate_post_saturations(per_post, options.max_position);
    curve.n_qualifying_posts = qualifying.size();
    return curve;
}

TsvTable saturation_tsv(const SaturationCurve& curve) {
    TsvTable t({"position", "unigram_gain", "bigram_gain", "compression_gain", "cumulative_vocab", "n_posts"});
    for (const auto& p : curve.points) {
        t.add_row({std::to_string(p.position), format_double(p.unigram_gain), format_double(p.bigram_gain),
                   format_double(p.compression_gain), format_double(p.cumulative_vocab), std::to_string(p.n_posts)});
    }
    return t;
}

}  // namespace threadscope

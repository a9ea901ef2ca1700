#include "threadscope/error.hpp"
#include "threadscope/judge.hpp"
#include "threadscope/providers.hpp"
#include "threadscope/util.hpp"

#include "support.hpp"

#include <fmt/format.h>
#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace threadscope {
namespace {

using testing::make_comment;
using testing::make_corpus;
using testing::make_post;

std::vector<SpecificityRecord> strata_records(std::size_t high, std::size_t zero, std::size_t negative) {
    std::vector<SpecificityRecord> out;
    auto add = [&](std::size_t n, Stratum s, const char* tag) {
        for (std::size_t i = 0; i < n; ++i) {
            SpecificityRecord r;
            r.comment_id = fmt::format("{}{:05}", tag, i);
            r.post_id = fmt::format("p{:04}", i % 97);
            r.stratum = s;
            out.push_back(std::move(r));
        }
    };
    add(high, Stratum::High, "h");
    add(zero, Stratum::ZeroOverlap, "z");
    add(negative, Stratum::Negative, "n");
    add(300, Stratum::Other, "o");
    return out;
}

TEST(BuildSample, DrawsTargetsFromEachStratum) {
    const auto records = strata_records(600, 2000, 700);
    const auto s = build_sample(records, SampleTargets{}, 42);
    std::map<Stratum, std::size_t> drawn;
    std::set<std::string> ids;
    for (const auto& e : s.entries) {
        ++drawn[e.stratum];
        ids.insert(e.comment_id);
    }
    EXPECT_EQ(drawn[Stratum::High], 500u);
    EXPECT_EQ(drawn[Stratum::ZeroOverlap], 1000u);
    EXPECT_EQ(drawn[Stratum::Negative], 500u);
    EXPECT_EQ(drawn.count(Stratum::Other), 0u);
    EXPECT_EQ(ids.size(), 2000u);
    EXPECT_TRUE(s.shortfall.empty());
    EXPECT_EQ(s.available.at(Stratum::ZeroOverlap), 2000u);
    for (std::size_t i = 1; i < s.entries.size(); ++i) EXPECT_LT(s.entries[i - 1].comment_id, s.entries[i].comment_id);
}

TEST(BuildSample, ShortStratumContributesEverythingAndRecordsShortfall) {
    const auto records = strata_records(100, 2000, 700);
    const auto s = build_sample(records, SampleTargets{}, 42);
    std::size_t high = 0;
    for (const auto& e : s.entries) high += e.stratum == Stratum::High;
    EXPECT_EQ(high, 100u);
    ASSERT_EQ(s.shortfall.size(), 1u);
    EXPECT_EQ(s.shortfall.at(Stratum::High), 400u);
}

TEST(BuildSample, DeterministicAndSeedSensitive) {
    const auto records = strata_records(600, 2000, 700);
    const auto a = sample_tsv(build_sample(records, SampleTargets{}, 7)).to_string();
    EXPECT_EQ(a, sample_tsv(build_sample(records, SampleTargets{}, 7)).to_string());
    EXPECT_NE(a, sample_tsv(build_sample(records, SampleTargets{}, 8)).to_string());
}

TEST(BuildSample, InputOrderDoesNotMatter) {
    auto records = strata_records(600, 2000, 700);
    const auto a = sample_tsv(build_sample(records, SampleTargets{}, 7)).to_string();
    Rng rng(1);
    rng.shuffle(records);
    EXPECT_EQ(a, sample_tsv(build_sample(records, SampleTargets{}, 7)).to_string());
}

TEST(BuildSample, TsvRoundTrip) {
    const auto s = build_sample(strata_records(10, 10, 10), SampleTargets{}, 1);
    const auto back = parse_sample_tsv(TsvTable::parse(sample_tsv(s).to_string()));
    ASSERT_EQ(back.entries.size(), s.entries.size());
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
        EXPECT_EQ(back.entries[i].comment_id, s.entries[i].comment_id);
        EXPECT_EQ(back.entries[i].post_id, s.entries[i].post_id);
        EXPECT_EQ(back.entries[i].stratum, s.entries[i].stratum);
    }
}

TEST(RenderPrompt, ByteIdenticalAndCompleteRubric) {
    const Post post = make_post("p1", "Memory benchmarks", "Results on long context.");
    const Comment comment = make_comment("c1", "p1", "Interesting numbers.");
    const std::string a = render_prompt(post, comment);
    EXPECT_EQ(a, render_prompt(post, comment));
    EXPECT_NE(a.find("Memory benchmarks"), std::string::npos);
    EXPECT_NE(a.find("Results on long context."), std::string::npos);
    EXPECT_NE(a.find("Interesting numbers."), std::string::npos);
    for (Category c : kAllCategories) {
        const std::string name(to_string(c));
        const auto first = a.find(name + ":");
        ASSERT_NE(first, std::string::npos) << name;
        EXPECT_EQ(a.find(name + ":", first + 1), std::string::npos) << name;
    }
}

TEST(RenderPrompt, EmptyBodyRendersTitleOnly) {
    const std::string p = render_prompt(make_post("p1", "Only a title"), make_comment("c1", "p1", "reply"));
    EXPECT_NE(p.find("Only a title"), std::string::npos);
    EXPECT_EQ(p.find("POST BODY"), std::string::npos);
}

TEST(Categories, ParseIsTolerant) {
    EXPECT_EQ(parse_category("generic_affirmation"), Category::GenericAffirmation);
    EXPECT_EQ(parse_category("Self-Promotion"), Category::SelfPromotion);
    EXPECT_EQ(parse_category("off topic"), Category::OffTopic);
    EXPECT_FALSE(parse_category("rant"));
    for (Category c : kAllCategories) EXPECT_EQ(parse_category(to_string(c)), c);
}

TEST(ParseVerdict, WellFormed) {
    const auto v = parse_verdict(R"({"responsiveness": 5, "information": 5, "category": "substantive"})");
    ASSERT_TRUE(v.verdict);
    EXPECT_EQ(v.verdict->responsiveness, 5);
    EXPECT_EQ(v.verdict->information, 5);
    EXPECT_EQ(v.verdict->category, Category::Substantive);
    EXPECT_EQ(v.error, VerdictError::None);
}

TEST(ParseVerdict, ProseAroundTheObjectIsIgnored) {
    const auto v = parse_verdict(
        "Sure! Here is my rating:\n```json\n{\"responsiveness\": \"2\", \"information\": 1, \"category\": "
        "\"generic_affirmation\"}\n```\nThanks {for} asking");
    ASSERT_TRUE(v.verdict);
    EXPECT_EQ(v.verdict->responsiveness, 2);
    EXPECT_EQ(v.verdict->category, Category::GenericAffirmation);
}

TEST(ParseVerdict, ErrorKinds) {
    EXPECT_EQ(parse_verdict("no object here").error, VerdictError::NoObject);
    EXPECT_EQ(parse_verdict("{broken").error, VerdictError::NoObject);
    EXPECT_EQ(parse_verdict(R"({"responsiveness": 6, "information": 5, "category": "spam"})").error,
              VerdictError::ScoreRange);
    EXPECT_EQ(parse_verdict(R"({"responsiveness": 0, "information": 5, "category": "spam"})").error,
              VerdictError::ScoreRange);
    EXPECT_EQ(parse_verdict(R"({"responsiveness": 2.5, "information": 5, "category": "spam"})").error,
              VerdictError::ScoreRange);
    EXPECT_EQ(parse_verdict(R"({"information": 5, "category": "spam"})").error, VerdictError::MissingField);
    EXPECT_EQ(parse_verdict(R"({"responsiveness": 3, "information": 5})").error, VerdictError::MissingField);
    EXPECT_EQ(parse_verdict(R"({"responsiveness": 3, "information": 5, "category": "rant"})").error,
              VerdictError::UnknownCategory);
    for (const char* raw : {"no object here", R"({"responsiveness": 6, "information": 5, "category": "spam"})"}) {
        const auto v = parse_verdict(raw);
        EXPECT_FALSE(v.verdict);
        EXPECT_FALSE(v.message.empty());
    }
}

constexpr const char* kMalformedMark = "MALFORMED-MARK";

// n comments on 50 posts; every 20th comment carries a marker that the mock
// judge answers with non-JSON.
struct JudgeFixture {
    Corpus corpus;
    JudgeSample sample;
    std::set<std::string> malformed_ids;
};

JudgeFixture judge_fixture(std::size_t n) {
    JudgeFixture f;
    std::vector<Post> posts;
    for (int p = 0; p < 50; ++p) posts.push_back(make_post(fmt::format("p{:02}", p), fmt::format("title {}", p)));
    std::vector<Comment> comments;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = fmt::format("c{:05}", i);
        const bool bad = i % 20 == 0;
        if (bad) f.malformed_ids.insert(id);
        comments.push_back(make_comment(id, fmt::format("p{:02}", i % 50),
                                        fmt::format("comment {} {}", i, bad ? kMalformedMark : "fine")));
        f.sample.entries.push_back({fmt::format("p{:02}", i % 50), id, Stratum::ZeroOverlap});
    }
    f.corpus = make_corpus(posts, comments);
    return f;
}

std::shared_ptr<MockProvider> scripted_judge() {
    MockProvider::Script script;
    script.model = "mock-judge";
    script.rules = {{kMalformedMark, "I would rather not answer in JSON."}};
    script.default_output = R"({"responsiveness": 3, "information": 2, "category": "on_topic"})";
    return std::make_shared<MockProvider>(script);
}

TEST(RunJudgement, EveryEntryJudgedWhenOutputsAreWellFormed) {
    auto f = judge_fixture(2000);
    MockProvider::Script script;
    script.default_output = R"({"responsiveness": 4, "information": 3, "category": "substantive"})";
    JudgeClient client(std::make_shared<MockProvider>(script), ProviderConfig::parse("mock:x"), nullptr);
    JudgeRunOptions opts;
    opts.primary = &client;
    const auto r = run_judgement(f.corpus, f.sample, opts);
    EXPECT_EQ(r.verdicts.size(), 2000u);
    EXPECT_TRUE(r.failures.empty());
    for (std::size_t i = 0; i < r.verdicts.size(); ++i) {
        EXPECT_EQ(r.verdicts[i].comment_id, f.sample.entries[i].comment_id);
        EXPECT_EQ(r.verdicts[i].responsiveness, 4);
    }
}

TEST(RunJudgement, MalformedOutputsAreListedExactly) {
    auto f = judge_fixture(2000);
    JudgeClient client(scripted_judge(), ProviderConfig::parse("mock:x"), nullptr);
    JudgeRunOptions opts;
    opts.primary = &client;
    const auto r = run_judgement(f.corpus, f.sample, opts);
    EXPECT_EQ(r.failures.size(), 100u);
    EXPECT_EQ(r.verdicts.size(), 1900u);
    std::set<std::string> failed;
    for (const auto& fail : r.failures) {
        failed.insert(fail.comment_id);
        EXPECT_EQ(fail.kind, "NO_OBJECT");
        EXPECT_EQ(fail.raw, "I would rather not answer in JSON.");
        EXPECT_EQ(fail.judge_model, "mock-judge");
    }
    EXPECT_EQ(failed, f.malformed_ids);
}

TEST(RunJudgement, WarmCacheMakesNoCalls) {
    auto f = judge_fixture(300);
    testing::TempDir dir;
    auto cache = std::make_shared<ResponseCache>(dir.path());
    auto first_backend = scripted_judge();
    JudgeClient first(first_backend, ProviderConfig::parse("mock:x"), cache);
    JudgeRunOptions opts;
    opts.primary = &first;
    const auto a = run_judgement(f.corpus, f.sample, opts);
    EXPECT_EQ(first_backend->calls(), 300u);

    auto second_backend = scripted_judge();
    JudgeClient second(second_backend, ProviderConfig::parse("mock:x"), cache);
    opts.primary = &second;
    const auto b = run_judgement(f.corpus, f.sample, opts);
    EXPECT_EQ(second_backend->calls(), 0u);
    EXPECT_EQ(verdicts_tsv(a.verdicts).to_string(), verdicts_tsv(b.verdicts).to_string());
    EXPECT_EQ(failures_tsv(a.failures).to_string(), failures_tsv(b.failures).to_string());
}

TEST(RunJudgement, CalibrationJudgeSeesOnlyThePrefix) {
    auto f = judge_fixture(300);
    JudgeClient primary(scripted_judge(), ProviderConfig::parse("mock:x"), nullptr);
    auto calib_backend = scripted_judge();
    JudgeClient calibration(calib_backend, ProviderConfig::parse("mock:y"), nullptr);
    JudgeRunOptions opts;
    opts.primary = &primary;
    opts.calibration = &calibration;
    opts.calibration_size = 40;
    const auto r = run_judgement(f.corpus, f.sample, opts);
    EXPECT_EQ(calib_backend->calls(), 40u);
    EXPECT_EQ(r.calibration_verdicts.size() + r.calibration_failures.size(), 40u);
}

TEST(RunJudgement, MissingRecordsAndAbsentOutputsAreFailures) {
    auto f = judge_fixture(3);
    f.sample.entries.push_back({"p00", "c-gone", Stratum::High});
    MockProvider::Script script;  // no default output: every call is absent
    JudgeClient client(std::make_shared<MockProvider>(script), ProviderConfig::parse("mock:x"), nullptr);
    JudgeRunOptions opts;
    opts.primary = &client;
    const auto r = run_judgement(f.corpus, f.sample, opts);
    EXPECT_TRUE(r.verdicts.empty());
    std::map<std::string, std::string> kinds;
    for (const auto& fail : r.failures) kinds[fail.comment_id] = fail.kind;
    EXPECT_EQ(kinds.at("c-gone"), "MISSING_RECORD");
    EXPECT_EQ(kinds.at("c00001"), "ABSENT");
}

TEST(Verdicts, TsvRoundTrip) {
    const std::vector<JudgeVerdict> v = {{"c1", 1, 5, Category::Spam, "m/a"}, {"c2", 5, 1, Category::Substantive, "m/a"}};
    const auto back = parse_verdicts_tsv(TsvTable::parse(verdicts_tsv(v).to_string()));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].comment_id, "c2");
    EXPECT_EQ(back[1].responsiveness, 5);
    EXPECT_EQ(back[1].category, Category::Substantive);
}

JudgeVerdict verdict(std::string id, int resp, Category c) { return {std::move(id), resp, resp, c, "m"}; }

TEST(Agreement, IdenticalListsAgreePerfectly) {
    std::vector<JudgeVerdict> a;
    for (int i = 0; i < 30; ++i) a.push_back(verdict(fmt::format("c{}", i), 1 + i % 5, kAllCategories[i % 6]));
    const auto s = agreement_stats(a, a);
    EXPECT_EQ(s.n_shared, 30u);
    EXPECT_DOUBLE_EQ(*s.kappa, 1.0);
    EXPECT_DOUBLE_EQ(s.exact_match, 1.0);
    EXPECT_DOUBLE_EQ(*s.spearman_responsiveness, 1.0);
}

TEST(Agreement, ConfusionFixtureGivesKappaPointFour) {
    // Confusion [[20, 5], [10, 15]] over {substantive, on_topic}: p_o = 0.7, p_e = 0.5.
    std::vector<JudgeVerdict> a, b;
    int id = 0;
    auto add = [&](int n, Category x, Category y) {
        for (int i = 0; i < n; ++i, ++id) {
            a.push_back(verdict(fmt::format("c{}", id), 3, x));
            b.push_back(verdict(fmt::format("c{}", id), 3, y));
        }
    };
    add(20, Category::Substantive, Category::Substantive);
    add(5, Category::Substantive, Category::OnTopic);
    add(10, Category::OnTopic, Category::Substantive);
    add(15, Category::OnTopic, Category::OnTopic);
    const auto s = agreement_stats(a, b);
    EXPECT_NEAR(*s.kappa, 0.40, 1e-12);
    EXPECT_NEAR(s.exact_match, 0.7, 1e-12);
    EXPECT_FALSE(s.spearman_responsiveness);  // constant scores
    EXPECT_EQ(agreement_document(s).find("spearman_responsiveness")->compare("NA"), 0);
}

TEST(Agreement, JoinsOnCommentIdAndNeedsTwoItems) {
    const std::vector<JudgeVerdict> a = {verdict("c1", 1, Category::Spam), verdict("c2", 2, Category::Spam)};
    const std::vector<JudgeVerdict> b = {verdict("c2", 2, Category::Spam), verdict("c9", 1, Category::Spam)};
    try {
        agreement_stats(a, b);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(MetricCorrelations, MonotoneRelationGivesRhoOne) {
    std::vector<JudgeVerdict> v;
    std::vector<SpecificityRecord> r;
    for (int i = 0; i < 50; ++i) {
        const std::string id = fmt::format("c{:03}", i);
        v.push_back(verdict(id, 1 + i / 10, Category::OnTopic));
        SpecificityRecord rec;
        rec.comment_id = id;
        rec.jaccard_actual = std::pow(static_cast<double>(i / 10), 2.0);
        rec.semantic_spec = static_cast<double>(i / 10) - 7.0;
        rec.stratum = i < 25 ? Stratum::High : Stratum::ZeroOverlap;
        r.push_back(rec);
    }
    const auto m = metric_correlations(v, r);
    EXPECT_EQ(m.n_joined, 50u);
    EXPECT_NEAR(*m.rho_resp_jaccard, 1.0, 1e-12);
    EXPECT_NEAR(*m.rho_resp_semantic, 1.0, 1e-12);
    EXPECT_EQ(m.by_stratum.at(Stratum::High).n, 25u);
    EXPECT_DOUBLE_EQ(m.mean_responsiveness, 3.0);
    EXPECT_EQ(m.category_counts.at(Category::OnTopic), 50u);
}

TEST(MetricCorrelations, IndependentScoresGiveSmallRho) {
    Rng rng(99);
    std::vector<JudgeVerdict> v;
    std::vector<SpecificityRecord> r;
    for (int i = 0; i < 2000; ++i) {
        const std::string id = fmt::format("c{:05}", i);
        v.push_back(verdict(id, 1 + static_cast<int>(rng.below(5)), Category::OnTopic));
        SpecificityRecord rec;
        rec.comment_id = id;
        rec.jaccard_actual = rng.unit();
        r.push_back(rec);
    }
    const auto m = metric_correlations(v, r);
    EXPECT_LT(std::abs(*m.rho_resp_jaccard), 0.1);
    EXPECT_FALSE(m.rho_resp_semantic);
    EXPECT_EQ(m.n_semantic, 0u);
}

TEST(MetricCorrelations, OrphansReportedAndEmptyJoinIsAnError) {
    const std::vector<JudgeVerdict> v = {verdict("c1", 1, Category::Spam), verdict("ghost", 2, Category::Spam)};
    SpecificityRecord rec;
    rec.comment_id = "c1";
    const std::vector<SpecificityRecord> r = {rec};
    const auto m = metric_correlations(v, r);
    EXPECT_EQ(m.orphans, std::vector<std::string>({"ghost"}));
    EXPECT_EQ(m.n_joined, 1u);
    try {
        metric_correlations(v, std::vector<SpecificityRecord>{});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
    }
}

TEST(MetricCorrelations, CategoryByStratumRowsSumToOne) {
    std::vector<JudgeVerdict> v;
    std::vector<SpecificityRecord> r;
    for (int i = 0; i < 12; ++i) {
        const std::string id = fmt::format("c{}", i);
        v.push_back(verdict(id, 3, kAllCategories[i % 6]));
        SpecificityRecord rec;
        rec.comment_id = id;
        rec.stratum = i % 2 ? Stratum::Negative : Stratum::High;
        r.push_back(rec);
    }
    const auto t = category_by_stratum_tsv(metric_correlations(v, r));
    ASSERT_EQ(t.rows().size(), 2u);
    for (const auto& row : t.rows()) {
        double sum = 0;
        for (Category c : kAllCategories) sum += std::stod(row[t.column(std::string(to_string(c)) + "_fraction")]);
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

}  // namespace
}  // namespace threadscope

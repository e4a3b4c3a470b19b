#include "korf/posttrain.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

#include "util.hpp"

namespace {

TEST(PosttrainGolden, EndingCompletion) {
    const std::string context =
        "Removing ice from car: Then, the man writes over the snow covering the window of a car, "
        "and a woman wearing winter clothes smiles. Then";
    const std::vector<std::string> choices = {
        ", the man adds wax to the windshield and cuts it.",
        ", a person board a ski lift, while two men supporting the head of the person wearing "
        "winter clothes snow as the we girls sled.",
        ", the man puts on a christmas coat, knitted with netting.",
        ", the man continues removing the snow on his car.",
    };
    auto r = korf::format_ending_completion(context, choices, 3);
    EXPECT_EQ(r.prompt, context);
    EXPECT_EQ(r.chosen, ", the man continues removing the snow on his car.");
    ASSERT_EQ(r.rejected.size(), 3u);
    EXPECT_EQ(r.rejected[0], choices[0]);
    EXPECT_EQ(r.rejected[1], choices[1]);
    EXPECT_EQ(r.rejected[2], choices[2]);
    EXPECT_EQ(r.task, korf::Task::ending_completion);
}

TEST(PosttrainGolden, FillInBlank) {
    const std::string sentence =
        "Ian volunteered to eat Dennis's menudo after already having a bowl because _ enjoyed "
        "eating intestine.";
    auto r = korf::format_fill_in_blank(sentence, "Ian", "Dennis");
    EXPECT_EQ(r.prompt,
              "Ian volunteered to eat Dennis's menudo after already having a bowl because");
    EXPECT_EQ(r.chosen, "Ian enjoyed eating intestine.");
    ASSERT_EQ(r.rejected.size(), 1u);
    EXPECT_EQ(r.rejected[0], "Dennis enjoyed eating intestine.");
}

TEST(PosttrainGolden, MmluStyle) {
    const std::string question = "Which factor will most likely cause a person to develop a fever?";
    const std::vector<std::string> choices = {
        "a leg muscle relaxing after exercise",
        "a bacterial population in the bloodstream",
        "several viral particles on the skin",
        "carbohydrates being digested in the stomach",
    };
    auto r = korf::format_mmlu_style(question, choices, 1);
    EXPECT_EQ(r.prompt,
              "Question: Which factor will most likely cause a person to develop a fever?\n"
              "A: a leg muscle relaxing after exercise\n"
              "B: a bacterial population in the bloodstream\n"
              "C: several viral particles on the skin\n"
              "D: carbohydrates being digested in the stomach\n"
              "Answer:");
    EXPECT_EQ(r.chosen, "B: a bacterial population in the bloodstream");
    ASSERT_EQ(r.rejected.size(), 3u);
    EXPECT_EQ(r.rejected[0], "A: a leg muscle relaxing after exercise");
    EXPECT_EQ(r.rejected[1], "C: several viral particles on the skin");
    EXPECT_EQ(r.rejected[2], "D: carbohydrates being digested in the stomach");
}

TEST(PosttrainGolden, MathEquationTagStripping) {
    const std::string question =
        "Natalia sold clips to 48 of her friends in April, and then she sold half as many clips "
        "in May. How many clips did Natalia sell altogether in April and May?";
    const std::string solution =
        "Natalia sold 48/2 = <<48/2=24>>24 clips in May.\n"
        "Natalia sold 48+24 = <<48+24=72>>72 clips altogether in April and May.\n"
        "#### 72";
    auto r = korf::format_math(question, solution);
    EXPECT_EQ(r.prompt, "Q: " + question + "\nA:");
    EXPECT_EQ(r.chosen,
              "Natalia sold 48/2 = 24 clips in May.\n"
              "Natalia sold 48+24 = 72 clips altogether in April and May.\n"
              "#### 72");
    EXPECT_TRUE(r.rejected.empty());
}

TEST(PosttrainGolden, Coding) {
    const std::string description =
        "Write a python function to find the first repeated character in a given string.";
    const std::string code =
        "def first_repeated_char(str1):\n"
        "    for index,c in enumerate(str1):\n"
        "        if str1[:index+1].count(c) > 1:\n"
        "            return c\n"
        "    return \"None\"";
    auto res = korf::format_coding(description, code);
    ASSERT_TRUE(std::holds_alternative<korf::PreferenceRecord>(res));
    const auto& r = std::get<korf::PreferenceRecord>(res);
    EXPECT_EQ(r.prompt,
              "def first_repeated_char(str1):\n"
              "    \"\"\"\n"
              "    Write a python function to find the first repeated character in a given "
              "string.\n"
              "    \"\"\"");
    EXPECT_EQ(r.chosen,
              "    for index,c in enumerate(str1):\n"
              "        if str1[:index+1].count(c) > 1:\n"
              "            return c\n"
              "    return \"None\"");
    EXPECT_TRUE(r.rejected.empty());
    // prompt + body re-concatenates into contiguous source
    EXPECT_EQ(r.prompt.substr(0, code.find('\n')), code.substr(0, code.find('\n')));
}

TEST(Posttrain, EndingCompletionSwapPermutes) {
    std::vector<std::string> choices = {"alpha", "beta", "gamma"};
    auto r0 = korf::format_ending_completion("ctx", choices, 0);
    auto r2 = korf::format_ending_completion("ctx", choices, 2);
    EXPECT_EQ(r0.chosen, "alpha");
    EXPECT_EQ(r2.chosen, "gamma");
    EXPECT_TRUE(std::find(r2.rejected.begin(), r2.rejected.end(), r0.chosen) != r2.rejected.end());
    EXPECT_TRUE(std::find(r0.rejected.begin(), r0.rejected.end(), r2.chosen) != r0.rejected.end());
    EXPECT_THROW(korf::format_ending_completion("ctx", {"only"}, 0), std::runtime_error);
    EXPECT_THROW(korf::format_ending_completion("ctx", choices, 3), std::runtime_error);
}

TEST(Posttrain, FillInBlankReconstruction) {
    std::mt19937_64 rng(51);
    for (int i = 0; i < 200; ++i) {
        std::string pre = testutil::random_korean_sentence(rng, 3);
        std::string post = testutil::random_korean_word(rng);
        std::string sentence = pre + " _" + post;
        std::string correct = testutil::random_korean_word(rng);
        auto r = korf::format_fill_in_blank(sentence, correct, correct + "x");
        EXPECT_EQ(r.prompt + " " + r.chosen, pre + " " + correct + post);
    }
    EXPECT_THROW(korf::format_fill_in_blank("no blank here", "a", "b"), std::runtime_error);
    EXPECT_THROW(korf::format_fill_in_blank("two _ blanks _", "a", "b"), std::runtime_error);
    EXPECT_THROW(korf::format_fill_in_blank("_ starts with blank", "a", "b"), std::runtime_error);
}

TEST(Posttrain, MmluLabelsAndBounds) {
    std::vector<std::string> five = {"1", "2", "3", "4", "5"};
    auto r = korf::format_mmlu_style("q", five, 4);
    EXPECT_EQ(r.chosen, "E: 5");
    EXPECT_NE(r.prompt.find("A: 1\n"), std::string::npos);
    EXPECT_THROW(korf::format_mmlu_style("q", five, 5), std::runtime_error);
    std::vector<std::string> many(27, "c");
    EXPECT_THROW(korf::format_mmlu_style("q", many, 0), std::runtime_error);
}

TEST(Posttrain, TagStrippingIdempotentAndErrors) {
    std::mt19937_64 rng(52);
    for (int i = 0; i < 1000; ++i) {
        std::string s;
        int parts = 1 + rng() % 6;
        for (int p = 0; p < parts; ++p) {
            s += testutil::random_korean_word(rng);
            if (rng() % 2) s += "<<" + std::to_string(rng() % 100) + "=" + std::to_string(rng() % 100) + ">>";
            s += std::to_string(rng() % 100);
        }
        auto once = korf::strip_equation_tags(s);
        EXPECT_EQ(korf::strip_equation_tags(once), once);
        EXPECT_EQ(once.find("<<"), std::string::npos);
    }
    EXPECT_EQ(korf::strip_equation_tags("no tags at all"), "no tags at all");
    try {
        korf::strip_equation_tags("abc<<1+1=2 and no close");
        FAIL() << "expected exception";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("position 3"), std::string::npos) << e.what();
    }
}

TEST(Posttrain, CodingSkipCases) {
    auto no_def = korf::format_coding("d", "x = 1\ny = 2");
    EXPECT_TRUE(std::holds_alternative<korf::SkippedSample>(no_def));
    auto two_defs = korf::format_coding("d", "def a():\n    pass\ndef b():\n    pass");
    EXPECT_TRUE(std::holds_alternative<korf::SkippedSample>(two_defs));
    auto with_class = korf::format_coding("d", "class C:\n    pass\ndef a():\n    pass");
    EXPECT_TRUE(std::holds_alternative<korf::SkippedSample>(with_class));
    auto empty_body = korf::format_coding("d", "def a():");
    EXPECT_TRUE(std::holds_alternative<korf::SkippedSample>(empty_body));
}

TEST(Posttrain, FilterSynthetic) {
    EXPECT_TRUE(korf::filter_synthetic("한국어로 작성된 답변입니다", 8192,
                                       korf::ExpectedLang::korean)
                    .keep);
    auto too_long = korf::filter_synthetic(std::string(10, 'a'), 9, korf::ExpectedLang::english);
    EXPECT_FALSE(too_long.keep);
    EXPECT_EQ(too_long.reason, "too_long");

    // 40% Hangul mixed response, expected english -> wrong_language
    std::string mixed = "한국 어토 큰다 섯개 " + std::string("abcdefabcdef");
    auto wrong = korf::filter_synthetic(mixed, 8192, korf::ExpectedLang::english);
    EXPECT_FALSE(wrong.keep);
    EXPECT_EQ(wrong.reason, "wrong_language");

    EXPECT_TRUE(korf::filter_synthetic("plain english answer", 8192,
                                       korf::ExpectedLang::english)
                    .keep);
    EXPECT_FALSE(korf::filter_synthetic("12345 67890", 8192, korf::ExpectedLang::english).keep);
    EXPECT_THROW(korf::filter_synthetic("x", 0, korf::ExpectedLang::english),
                 std::invalid_argument);
}

TEST(Posttrain, GradeMathResponse) {
    auto a = korf::grade_math_response(
        "At $2 per egg, she makes 9 * $2 = $18 every day at the market. The answer is 18.", 18);
    EXPECT_TRUE(a.chosen);
    EXPECT_EQ(a.reason, "correct");

    auto b = korf::grade_math_response("계산 결과는 다음과 같습니다.\n#### 18000", 18000);
    EXPECT_TRUE(b.chosen);
    EXPECT_EQ(b.reason, "correct");

    auto c = korf::grade_math_response("#### 17999", 18000);
    EXPECT_FALSE(c.chosen);
    EXPECT_EQ(c.reason, "wrong_answer");

    auto d = korf::grade_math_response("I am not sure about this one.", 5);
    EXPECT_FALSE(d.chosen);
    EXPECT_EQ(d.reason, "unparsed");

    // later anchor wins; commas and $ tolerated
    auto e = korf::grade_math_response("#### 3 ... wait. The answer is $1,234.", 1234);
    EXPECT_TRUE(e.chosen);
    EXPECT_THROW(korf::grade_math_response("#### 1", std::nan("")), std::invalid_argument);
}

TEST(Posttrain, GradeNeverChoosesUnparseable) {
    std::mt19937_64 rng(53);
    for (int i = 0; i < 500; ++i) {
        std::string noise = testutil::random_korean_sentence(rng, 5);
        auto g = korf::grade_math_response(noise, static_cast<double>(rng() % 100));
        EXPECT_FALSE(g.chosen);
    }
}

TEST(Posttrain, BalanceMixQuotaAndDuplication) {
    auto rec = [](const std::string& p) {
        korf::PreferenceRecord r;
        r.prompt = p;
        r.chosen = "c";
        return r;
    };
    std::vector<std::pair<std::string, std::vector<korf::PreferenceRecord>>> sources;
    sources.emplace_back("A", std::vector<korf::PreferenceRecord>{
                                  rec("a0"), rec("a1"), rec("a2"), rec("a3"), rec("a4"), rec("a5"),
                                  rec("a6"), rec("a7"), rec("a8"), rec("a9")});
    sources.emplace_back("B", std::vector<korf::PreferenceRecord>{rec("b0"), rec("b1"), rec("b2")});

    korf::MixPlan plan;
    plan.per_source_quota = 6;
    plan.seed = 99;
    auto mixed = korf::balance_mix(sources, plan);
    ASSERT_EQ(mixed.size(), 12u);
    std::map<std::string, int> per_source;
    std::map<std::string, int> b_prompts;
    for (const auto& r : mixed) {
        per_source[r.source]++;
        if (r.source == "B") b_prompts[r.prompt]++;
    }
    EXPECT_EQ(per_source["A"], 6);
    EXPECT_EQ(per_source["B"], 6);
    // B extended cyclically: each of its 3 records duplicated exactly twice
    ASSERT_EQ(b_prompts.size(), 3u);
    for (const auto& [p, n] : b_prompts) EXPECT_EQ(n, 2);

    // determinism
    auto again = korf::balance_mix(sources, plan);
    ASSERT_EQ(again.size(), mixed.size());
    for (size_t i = 0; i < mixed.size(); ++i) EXPECT_EQ(again[i].prompt, mixed[i].prompt);

    plan.seed = 100;
    auto shuffled = korf::balance_mix(sources, plan);
    bool differs = false;
    for (size_t i = 0; i < mixed.size(); ++i) differs |= shuffled[i].prompt != mixed[i].prompt;
    EXPECT_TRUE(differs);

    plan.duplication_allowed = false;
    EXPECT_THROW(korf::balance_mix(sources, plan), std::runtime_error);
    sources.emplace_back("empty", std::vector<korf::PreferenceRecord>{});
    plan.duplication_allowed = true;
    try {
        korf::balance_mix(sources, plan);
        FAIL() << "expected exception";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("empty"), std::string::npos);
    }
}

TEST(Posttrain, RecordJsonRoundTripAndSftFlag) {
    korf::PreferenceRecord r;
    r.prompt = "p";
    r.chosen = "c";
    r.rejected = {"r1", "r2"};
    r.source = "src";
    r.task = korf::Task::mmlu_style;
    auto j = korf::record_to_json(r);
    EXPECT_FALSE(j.contains("sft_only"));
    auto back = korf::record_from_json(j);
    EXPECT_EQ(back.prompt, r.prompt);
    EXPECT_EQ(back.rejected, r.rejected);
    EXPECT_EQ(back.task, r.task);

    r.rejected.clear();
    auto j2 = korf::record_to_json(r);
    EXPECT_TRUE(j2.value("sft_only", false));
}

TEST(Posttrain, RecordInvariantsEnforced) {
    korf::PreferenceRecord r;
    r.prompt = "";
    r.chosen = "c";
    EXPECT_THROW(r.check(), std::runtime_error);
    r.prompt = "p";
    r.chosen = "";
    EXPECT_THROW(r.check(), std::runtime_error);
    r.chosen = "c";
    r.rejected = {"x", "c"};
    EXPECT_THROW(r.check(), std::runtime_error);
    r.rejected = {"x"};
    EXPECT_NO_THROW(r.check());
}

}  // namespace

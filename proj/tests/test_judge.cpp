#include <doctest.h>

#include "abstain/errors.hpp"
#include "abstain/judge.hpp"
#include "abstain/util.hpp"

using namespace abstain;

TEST_CASE("abstention phrases from the built-in list") {
    CHECK(is_abstention("I'm unable to answer this."));
    CHECK(is_abstention("I don't know"));
    CHECK(is_abstention("the answer is unknown"));
    CHECK(is_abstention("There is no answer here"));
    CHECK(is_abstention("We cannot answer that"));
    CHECK(is_abstention("I do not know the answer"));
    CHECK_FALSE(is_abstention("The answer is Paris."));
    CHECK_FALSE(is_abstention(""));
}

TEST_CASE("bare unknown matches at word starts only") {
    CHECK(is_abstention("unknown"));
    CHECK(is_abstention("Unknown."));
    CHECK(is_abstention("it is unknown, sorry"));
    // no match when the word starts inside a longer word
    CHECK_FALSE(contains_unknown_token("wellunknown"));
    CHECK_FALSE(is_abstention("theunknown"));
    // a right boundary is deliberately not required: the check must stay
    // monotone under concatenation
    CHECK(is_abstention("unknowns"));
    CHECK(contains_unknown_token("(unknown)"));
}

TEST_CASE("matching is case-insensitive with whitespace collapse") {
    CHECK(is_abstention("I DO  NOT\tKNOW"));
    CHECK(is_abstention("Cannot  Answer"));
    CHECK_FALSE(is_abstention("cannotanswer"));
}

TEST_CASE("phrase list override") {
    const auto custom = abstention_phrases::from_lines({"nie wiem", ""});
    CHECK(is_abstention("Nie Wiem", custom));
    CHECK_FALSE(custom.matches("I don't know"));
    // the standalone-unknown rule is independent of the phrase list
    CHECK(is_abstention("unknown", custom));
    CHECK_THROWS_AS(abstention_phrases::from_lines({"", "  "}), data_error);
}

TEST_CASE("abstention is monotone under concatenation") {
    rng64 rng(17);
    const std::string pieces[] = {"unknown", "paris", " is ", "no answer", "xyz.", " "};
    for (int it = 0; it < 2000; ++it) {
        std::string s;
        for (size_t i = 0, n = 1 + rng.below(4); i < n; ++i) s += pieces[rng.below(6)];
        if (is_abstention(s)) {
            for (size_t i = 0; i < 6; ++i) CHECK(is_abstention(s + pieces[i]));
        }
    }
}

TEST_CASE("containment correctness") {
    CHECK(is_correct("it was christina aguilera", {"Christina"}));
    CHECK(is_correct("Paris.", {"paris"}));
    CHECK_FALSE(is_correct("London", {"Paris"}));
    CHECK(is_correct("the  answer   is Paris", {"answer is paris"}));
    CHECK(is_correct("answer: 42", {"42", "forty-two"}));
    CHECK_THROWS_AS(is_correct("x", {}), invalid_argument_error);
}

TEST_CASE("normalize_answer") {
    CHECK(normalize_answer("  Paris. ") == "paris");
    CHECK(normalize_answer("\"Quoted\"") == "quoted");
    CHECK(normalize_answer("A  B\t C") == "a b c");
    CHECK(normalize_answer("...") == "");
}

TEST_CASE("outcome classification table") {
    eval_instance answerable;
    answerable.id = "a";
    answerable.question = "q";
    answerable.golds = {"gold"};
    answerable.answerable = true;

    eval_instance unanswerable = answerable;
    unanswerable.answerable = false;

    CHECK(classify_outcome({"gold stuff", false}, answerable) == outcome_bucket::n1);
    CHECK(classify_outcome({"wrong", false}, answerable) == outcome_bucket::n2);
    CHECK(classify_outcome({"unknown", true}, answerable) == outcome_bucket::n3);
    CHECK(classify_outcome({"anything", false}, unanswerable) == outcome_bucket::n4);
    // a lucky textual match on an unanswerable query is still N4
    CHECK(classify_outcome({"gold", false}, unanswerable) == outcome_bucket::n4);
    CHECK(classify_outcome({"unknown answer here", true}, unanswerable) == outcome_bucket::n5);
}

TEST_CASE("classification agrees with a truth-table oracle") {
    // independent oracle over (answerable, abstained, correct)
    const auto oracle = [](bool answerable, bool abstained, bool correct) {
        if (answerable && !abstained && correct) return outcome_bucket::n1;
        if (answerable && !abstained && !correct) return outcome_bucket::n2;
        if (answerable && abstained) return outcome_bucket::n3;
        if (!answerable && !abstained) return outcome_bucket::n4;
        return outcome_bucket::n5;
    };

    for (bool answerable : {true, false}) {
        for (bool abstained : {true, false}) {
            for (bool correct : {true, false}) {
                eval_instance inst;
                inst.id = "x";
                inst.question = "q";
                inst.golds = {"gold"};
                inst.answerable = answerable;
                judged_prediction pred;
                pred.abstained = abstained;
                pred.text = correct ? "the gold one" : "something else";
                CHECK(classify_outcome(pred, inst) == oracle(answerable, abstained, correct));
            }
        }
    }
}

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace abstain {

// One evaluation unit: a question paired with one context, the accepted
// answers, and whether any relevant knowledge exists for it.
struct eval_instance {
    std::string id;
    std::string question;
    std::string context;
    std::vector<std::string> golds;
    bool answerable = true;
};

// The five outcome buckets: correct answer / wrong answer / abstained on an
// answerable query; answered / abstained on an unanswerable one.
enum class outcome_bucket { n1, n2, n3, n4, n5 };

std::string_view outcome_bucket_name(outcome_bucket b);

// Abstention phrase matching. The default list can be replaced from a
// plain-text file, one phrase per line.
class abstention_phrases {
public:
    abstention_phrases();  // built-in phrase list
    static abstention_phrases from_file(const std::string& path);
    static abstention_phrases from_lines(const std::vector<std::string>& phrases);

    const std::vector<std::string>& phrases() const noexcept { return phrases_; }

    bool matches(std::string_view text) const;

private:
    std::vector<std::string> phrases_;  // stored normalized
};

// Lowercase, collapse whitespace, strip leading/trailing punctuation.
std::string normalize_answer(std::string_view text);

// True when the text contains "unknown" starting at a word boundary.
bool contains_unknown_token(std::string_view text);

bool is_abstention(std::string_view text);
bool is_abstention(std::string_view text, const abstention_phrases& phrases);

// Containment judging: the normalized prediction contains some normalized
// gold as a substring.
bool is_correct(std::string_view text, const std::vector<std::string>& golds);

struct judged_prediction {
    std::string text;
    bool abstained = false;
};

outcome_bucket classify_outcome(const judged_prediction& pred, const eval_instance& instance);

}  // namespace abstain

#include "abstain/judge.hpp"

#include <cctype>
#include <sstream>

#include "abstain/errors.hpp"
#include "abstain/util.hpp"

namespace abstain {

std::string_view outcome_bucket_name(outcome_bucket b) {
    switch (b) {
        case outcome_bucket::n1: return "N1";
        case outcome_bucket::n2: return "N2";
        case outcome_bucket::n3: return "N3";
        case outcome_bucket::n4: return "N4";
        case outcome_bucket::n5: return "N5";
    }
    return "?";
}

abstention_phrases::abstention_phrases() {
    static const char* kDefaults[] = {
        "unknown answer", "answer is unknown", "unable to answer", "no answer",
        "cannot answer",  "don't know",        "do not know",
    };
    for (const char* p : kDefaults) phrases_.push_back(p);
}

abstention_phrases abstention_phrases::from_lines(const std::vector<std::string>& phrases) {
    abstention_phrases out;
    out.phrases_.clear();
    for (const auto& p : phrases) {
        std::string norm = collapse_whitespace(to_lower(p));
        if (!norm.empty()) out.phrases_.push_back(std::move(norm));
    }
    if (out.phrases_.empty()) throw data_error("abstention phrase list is empty");
    return out;
}

abstention_phrases abstention_phrases::from_file(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return from_lines(lines);
}

bool abstention_phrases::matches(std::string_view text) const {
    const std::string norm = collapse_whitespace(to_lower(text));
    for (const auto& phrase : phrases_) {
        if (contains(norm, phrase)) return true;
    }
    return false;
}

std::string normalize_answer(std::string_view text) {
    std::string norm = collapse_whitespace(to_lower(text));
    size_t begin = 0;
    size_t end = norm.size();
    while (begin < end && std::ispunct(static_cast<unsigned char>(norm[begin]))) ++begin;
    while (end > begin && std::ispunct(static_cast<unsigned char>(norm[end - 1]))) --end;
    return norm.substr(begin, end - begin);
}

bool contains_unknown_token(std::string_view text) {
    // Word-start boundary only: a right boundary would make the check
    // non-monotone under concatenation ("unknown" + "s"), breaking the
    // is_abstention(s) => is_abstention(s + t) contract.
    const std::string norm = to_lower(text);
    static constexpr std::string_view word = "unknown";
    size_t pos = 0;
    while ((pos = norm.find(word, pos)) != std::string::npos) {
        if (pos == 0 || !std::isalnum(static_cast<unsigned char>(norm[pos - 1]))) return true;
        pos += word.size();
    }
    return false;
}

bool is_abstention(std::string_view text, const abstention_phrases& phrases) {
    return phrases.matches(text) || contains_unknown_token(text);
}

bool is_abstention(std::string_view text) {
    static const abstention_phrases defaults;
    return is_abstention(text, defaults);
}

bool is_correct(std::string_view text, const std::vector<std::string>& golds) {
    if (golds.empty()) throw invalid_argument_error("gold answer list is empty");
    const std::string pred = normalize_answer(text);
    for (const auto& gold : golds) {
        const std::string g = normalize_answer(gold);
        if (!g.empty() && contains(pred, g)) return true;
    }
    return false;
}

outcome_bucket classify_outcome(const judged_prediction& pred, const eval_instance& instance) {
    if (pred.abstained) {
        return instance.answerable ? outcome_bucket::n3 : outcome_bucket::n5;
    }
    if (!instance.answerable) return outcome_bucket::n4;  // lucky guesses are not rewarded
    return is_correct(pred.text, instance.golds) ? outcome_bucket::n1 : outcome_bucket::n2;
}

}  // namespace abstain

#include "abstain/prompt.hpp"

#include <array>

#include "abstain/errors.hpp"
#include "abstain/util.hpp"

namespace abstain {

namespace {

constexpr std::string_view kParametricBody =
    "Answer the following question.\n\nQuestion: {x}\nAnswer:";
constexpr std::string_view kContextualBody =
    "Answer the following question based on the given context.\n\n"
    "Context: {c}\nQuestion: {x}\nAnswer:";
constexpr std::string_view kAbstentionBody =
    "Answer the following question based on the given context. If the question "
    "cannot be answered, respond with 'unknown'.\n\n"
    "Context: {c}\nQuestion: {x}\nAnswer:";
constexpr std::string_view kVerificationBody =
    "Context: {c}\nQuestion: {x}\nProposed answer: {y_hat}\n"
    "Is the proposed answer to the question known or unknown?\nAnswer:";

void replace_all(std::string& text, std::string_view from, std::string_view to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string fill(std::string_view body, std::string_view c, std::string_view x,
                 std::string_view y_hat) {
    std::string out(body);
    replace_all(out, "{c}", c);
    replace_all(out, "{x}", x);
    replace_all(out, "{y_hat}", y_hat);
    return out;
}

// Longest placeholder-free chunk of a body; used as a kind-identifying
// substring by mock-backend rules.
std::string longest_static_chunk(std::string_view body) {
    static constexpr std::array<std::string_view, 3> placeholders = {"{c}", "{x}", "{y_hat}"};
    std::string best;
    size_t pos = 0;
    while (pos <= body.size()) {
        size_t cut = std::string_view::npos;
        size_t cut_len = 0;
        for (auto ph : placeholders) {
            size_t p = body.find(ph, pos);
            if (p < cut) {
                cut = p;
                cut_len = ph.size();
            }
        }
        std::string_view chunk =
            cut == std::string_view::npos ? body.substr(pos) : body.substr(pos, cut - pos);
        if (chunk.size() > best.size()) best = std::string(chunk);
        if (cut == std::string_view::npos) break;
        pos = cut + cut_len;
    }
    return best;
}

}  // namespace

std::string_view template_kind_name(template_kind kind) {
    switch (kind) {
        case template_kind::parametric: return "parametric";
        case template_kind::contextual: return "contextual";
        case template_kind::abstention: return "abstention";
        case template_kind::verification: return "verification";
        case template_kind::null_parametric: return "null_parametric";
        case template_kind::null_contextual: return "null_contextual";
    }
    return "?";
}

template_set::template_set()
    : parametric_(kParametricBody),
      contextual_(kContextualBody),
      abstention_(kAbstentionBody),
      verification_(kVerificationBody) {}

const std::string& template_set::body(template_kind kind) const {
    switch (kind) {
        case template_kind::parametric:
        case template_kind::null_parametric: return parametric_;
        case template_kind::contextual:
        case template_kind::null_contextual: return contextual_;
        case template_kind::abstention: return abstention_;
        case template_kind::verification: return verification_;
    }
    throw invalid_argument_error("unknown template kind");
}

void template_set::set_body(template_kind kind, std::string body) {
    switch (kind) {
        case template_kind::parametric: parametric_ = std::move(body); return;
        case template_kind::contextual: contextual_ = std::move(body); return;
        case template_kind::abstention: abstention_ = std::move(body); return;
        case template_kind::verification: verification_ = std::move(body); return;
        default:
            throw invalid_argument_error("null template bodies are derived, not set directly");
    }
}

template_set template_set::from_file(const std::string& path) {
    return from_text(read_text_file(path));
}

template_set template_set::from_text(std::string_view text) {
    template_set out;
    std::string current_key;
    std::string current_body;
    auto flush = [&] {
        if (current_key.empty()) return;
        // strip one trailing newline left by the block layout
        while (!current_body.empty() && current_body.back() == '\n') current_body.pop_back();
        if (current_key == "parametric") out.parametric_ = current_body;
        else if (current_key == "contextual") out.contextual_ = current_body;
        else if (current_key == "abstention") out.abstention_ = current_body;
        else if (current_key == "verification") out.verification_ = current_body;
        else throw data_error("unknown template key: " + current_key);
        current_body.clear();
    };

    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view line =
            eol == std::string_view::npos ? text.substr(pos) : text.substr(pos, eol - pos);
        if (!line.empty() && line.front() == '[' && line.back() == ']') {
            flush();
            current_key = std::string(line.substr(1, line.size() - 2));
        } else if (!current_key.empty()) {
            current_body.append(line);
            current_body.push_back('\n');
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    flush();
    return out;
}

rendered_prompt template_set::render(template_kind kind,
                                     std::optional<std::string_view> context,
                                     std::optional<std::string_view> question,
                                     std::optional<std::string_view> candidate_answer,
                                     const std::vector<demo>& demos,
                                     std::string_view generated_prefix) const {
    const bool is_null =
        kind == template_kind::null_parametric || kind == template_kind::null_contextual;

    std::string_view c;
    std::string_view x;
    std::string_view y_hat;
    switch (kind) {
        case template_kind::parametric:
            if (!question) throw invalid_argument_error("parametric template requires a question");
            x = *question;
            break;
        case template_kind::contextual:
        case template_kind::abstention:
            if (!context || !question) {
                throw invalid_argument_error("contextual template requires context and question");
            }
            c = *context;
            x = *question;
            break;
        case template_kind::verification:
            if (!context || !question || !candidate_answer) {
                throw invalid_argument_error(
                    "verification template requires context, question, and a candidate answer");
            }
            c = *context;
            x = *question;
            y_hat = *candidate_answer;
            break;
        case template_kind::null_parametric:
            x = null_question_token;
            break;
        case template_kind::null_contextual:
            c = null_context_token;
            x = null_question_token;
            break;
    }

    const std::string& main_body = body(kind);

    rendered_prompt out;
    out.kind = kind;

    const bool demos_apply =
        kind != template_kind::verification && (!is_null || null_prompts_keep_demos);
    if (demos_apply) {
        for (const demo& d : demos) {
            out.text += fill(main_body, d.context, d.question, "");
            out.text += ' ';
            out.text += d.answer;
            out.text += "\n\n";
            ++out.demo_count;
        }
    }

    out.text += fill(main_body, c, x, y_hat);
    out.text += generated_prefix;
    return out;
}

std::string template_set::kind_marker(template_kind kind) const {
    // Note: the null_parametric marker also occurs in null_contextual
    // renderings; rules keyed on it should be ordered after null_contextual
    // rules (first match wins).
    switch (kind) {
        case template_kind::null_parametric:
            return std::string("Question: ") + std::string(null_question_token);
        case template_kind::null_contextual:
            return std::string("Context: ") + std::string(null_context_token);
        default:
            return longest_static_chunk(body(kind));
    }
}

}  // namespace abstain

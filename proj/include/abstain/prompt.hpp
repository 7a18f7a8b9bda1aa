#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace abstain {

enum class template_kind {
    parametric,
    contextual,
    abstention,
    verification,
    null_parametric,
    null_contextual,
};

std::string_view template_kind_name(template_kind kind);

// Few-shot demonstration; context is ignored by context-free templates.
struct demo {
    std::string question;
    std::string context;
    std::string answer;
};

struct rendered_prompt {
    std::string text;
    template_kind kind = template_kind::parametric;
    int demo_count = 0;
};

// The four template bodies with {c} / {x} / {y_hat} placeholders. The null
// variants reuse the parametric and contextual bodies with the placeholder
// tokens substituted for the instance text.
class template_set {
public:
    template_set();  // canonical wording

    // Override bodies from a plain-text file of [kind] blocks.
    static template_set from_file(const std::string& path);
    static template_set from_text(std::string_view text);

    const std::string& body(template_kind kind) const;
    void set_body(template_kind kind, std::string body);

    // Demonstrations inside the content-free null prompts: the intrinsic bias
    // being calibrated away includes demo-induced bias, so they stay in by
    // default.
    bool null_prompts_keep_demos = true;

    rendered_prompt render(template_kind kind,
                           std::optional<std::string_view> context,
                           std::optional<std::string_view> question,
                           std::optional<std::string_view> candidate_answer,
                           const std::vector<demo>& demos,
                           std::string_view generated_prefix) const;

    // Distinctive substring of a kind's default rendering, for mock-backend
    // rule construction.
    std::string kind_marker(template_kind kind) const;

private:
    std::string parametric_;
    std::string contextual_;
    std::string abstention_;
    std::string verification_;
};

inline constexpr std::string_view null_question_token = "[QUESTION]";
inline constexpr std::string_view null_context_token = "[CONTEXT]";

}  // namespace abstain

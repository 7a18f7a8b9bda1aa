#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abstain/backend.hpp"
#include "abstain/judge.hpp"
#include "abstain/prompt.hpp"

namespace abstain {

enum class data_split { train, eval };

// Ingested QA triple. Word limits (question <= 50, answer <= 10) are
// enforced by the ingestion adapter, not here.
struct qa_record {
    std::string id;
    std::string question;
    std::string answer;
    std::string context;
    data_split split = data_split::eval;
};

// Final testbed element: a question with a verified-relevant context, a
// verified-irrelevant context, and the parametric-knowledge flag.
struct testbed_record {
    std::string id;
    std::string question;
    std::string context_pos;
    std::string context_neg;
    std::string answer;
    int p = 0;
    // provenance
    double consistency_p = 0.0;
    double consistency_c_pos = 0.0;
    int candidate_rank = 0;
};

class embedding_provider {
public:
    virtual ~embedding_provider() = default;
    virtual std::vector<double> embed(std::string_view text) const = 0;
};

// Deterministic hashed bag-of-words embedding; cosine similarity then
// reflects lexical overlap, which is enough to exercise the ranking logic.
class hashed_bow_embedder final : public embedding_provider {
public:
    explicit hashed_bow_embedder(size_t dim = 64) : dim_(dim) {}
    std::vector<double> embed(std::string_view text) const override;

private:
    size_t dim_;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Consecutive non-overlapping windows of span_words whitespace words;
// returns only the windows containing an occurrence of the answer.
std::vector<std::string> split_context_spans(std::string_view context, std::string_view answer,
                                             int span_words = 100);

// Consistency rate m/n over n seeded temperature samples, scored by
// containment against the golds. Sample i uses seed + i.
double estimate_consistency(const lm_backend& backend, const template_set& templates,
                            std::string_view question, template_kind kind,
                            std::optional<std::string_view> context,
                            const std::vector<std::string>& golds, int n, double temperature,
                            uint64_t seed, int max_tokens = 32,
                            const std::vector<demo>& demos = {});

enum class knowledge_class { no_knowledge, has_knowledge, discard };

// r = 0 -> no parametric knowledge; r > eta (strict) -> has knowledge;
// anything between is discarded.
knowledge_class classify_parametric(double r, double eta = 0.7);

struct build_config {
    int n = 10;
    double temperature = 1.0;
    double eta = 0.7;
    uint64_t seed = 0;
    int span_words = 100;
    int max_tokens = 32;
    int candidate_cap = 5;  // 1 reproduces the strict single-candidate rule
    int question_word_limit = 50;
    int answer_word_limit = 10;
};

struct irrelevant_pick {
    std::string context;
    int rank = 0;  // 0-based position in the similarity ranking
};

// Walks the train contexts in descending cosine similarity to context_pos,
// accepting the first candidate whose contextual consistency rate is exactly
// zero. Considers at most cfg.candidate_cap candidates.
std::optional<irrelevant_pick> select_irrelevant_context(
    const lm_backend& backend, const template_set& templates, const embedding_provider& embedder,
    std::string_view question, std::string_view context_pos,
    const std::vector<std::string>& golds, const std::vector<qa_record>& train_pool,
    const build_config& cfg, uint64_t seed);

// Per-stage survivor counts for the attrition report.
struct attrition_report {
    int64_t input_records = 0;
    int64_t eval_records = 0;
    int64_t no_span = 0;
    int64_t span_candidates = 0;
    int64_t parametric_discarded = 0;
    int64_t context_not_relevant = 0;
    int64_t no_irrelevant_candidate = 0;
    int64_t surviving = 0;
    int64_t balanced = 0;
};

// The full pipeline: span split, parametric classification, relevant-context
// verification, irrelevant-context selection, and seeded balancing of the
// p = 0 / p = 1 groups.
std::vector<testbed_record> build_testbed(const std::vector<qa_record>& records,
                                          const lm_backend& backend,
                                          const template_set& templates,
                                          const embedding_provider& embedder,
                                          const build_config& cfg,
                                          attrition_report* attrition = nullptr);

// Two instances per record: the relevant-context pair is always answerable;
// the irrelevant-context pair is answerable only when p = 1.
std::vector<eval_instance> expand_eval(const std::vector<testbed_record>& records);

}  // namespace abstain

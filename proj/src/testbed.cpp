#include "abstain/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abstain/errors.hpp"
#include "abstain/util.hpp"

namespace abstain {

std::vector<double> hashed_bow_embedder::embed(std::string_view text) const {
    std::vector<double> v(dim_, 0.0);
    for (const auto& word : split_words(to_lower(text))) {
        v[fnv1a64(word) % dim_] += 1.0;
    }
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
        v[0] = 1.0;  // keep cosine well-defined for empty text
    }
    return v;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw shape_error("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw invalid_input_error("cosine of a zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::string> split_context_spans(std::string_view context, std::string_view answer,
                                             int span_words) {
    if (span_words < 1) throw invalid_argument_error("span_words must be >= 1");
    const std::string gold = normalize_answer(answer);
    if (gold.empty() || !contains(normalize_answer(context), gold)) {
        throw data_error("answer does not occur in the context");
    }
    const std::vector<std::string> words = split_words(context);
    std::vector<std::string> spans;
    for (size_t start = 0; start < words.size(); start += static_cast<size_t>(span_words)) {
        const size_t end = std::min(words.size(), start + static_cast<size_t>(span_words));
        std::string span;
        for (size_t i = start; i < end; ++i) {
            if (!span.empty()) span += ' ';
            span += words[i];
        }
        if (contains(normalize_answer(span), gold)) spans.push_back(std::move(span));
    }
    return spans;
}

double estimate_consistency(const lm_backend& backend, const template_set& templates,
                            std::string_view question, template_kind kind,
                            std::optional<std::string_view> context,
                            const std::vector<std::string>& golds, int n, double temperature,
                            uint64_t seed, int max_tokens, const std::vector<demo>& demos) {
    if (n < 1) throw invalid_argument_error("sample count must be >= 1");
    if (kind != template_kind::parametric && kind != template_kind::contextual) {
        throw invalid_argument_error("consistency estimation uses the parametric or contextual template");
    }
    const rendered_prompt prompt = templates.render(kind, context, question, std::nullopt, demos, "");
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        const std::string sample =
            sample_sequence(backend, prompt, temperature, max_tokens, seed + static_cast<uint64_t>(i));
        if (is_correct(sample, golds)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

knowledge_class classify_parametric(double r, double eta) {
    if (!(r >= 0.0 && r <= 1.0)) throw invalid_argument_error("consistency rate outside [0, 1]");
    if (r == 0.0) return knowledge_class::no_knowledge;
    if (r > eta) return knowledge_class::has_knowledge;
    return knowledge_class::discard;
}

std::optional<irrelevant_pick> select_irrelevant_context(
    const lm_backend& backend, const template_set& templates, const embedding_provider& embedder,
    std::string_view question, std::string_view context_pos,
    const std::vector<std::string>& golds, const std::vector<qa_record>& train_pool,
    const build_config& cfg, uint64_t seed) {
    if (train_pool.empty()) throw invalid_argument_error("train pool is empty");

    // dedupe identical contexts, preserving first occurrence
    std::vector<std::string> candidates;
    candidates.reserve(train_pool.size());
    for (const auto& rec : train_pool) {
        if (std::find(candidates.begin(), candidates.end(), rec.context) == candidates.end()) {
            candidates.push_back(rec.context);
        }
    }

    const std::vector<double> anchor = embedder.embed(context_pos);
    std::vector<std::pair<double, size_t>> ranked;
    ranked.reserve(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i) {
        ranked.emplace_back(cosine_similarity(anchor, embedder.embed(candidates[i])), i);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first > b.first;
    });

    const size_t cap = std::min<size_t>(ranked.size(), static_cast<size_t>(cfg.candidate_cap));
    for (size_t rank = 0; rank < cap; ++rank) {
        const std::string& candidate = candidates[ranked[rank].second];
        const double r = estimate_consistency(
            backend, templates, question, template_kind::contextual, candidate, golds, cfg.n,
            cfg.temperature, seed + rank, cfg.max_tokens);
        if (r == 0.0) return irrelevant_pick{candidate, static_cast<int>(rank)};
    }
    return std::nullopt;
}

std::vector<testbed_record> build_testbed(const std::vector<qa_record>& records,
                                          const lm_backend& backend,
                                          const template_set& templates,
                                          const embedding_provider& embedder,
                                          const build_config& cfg,
                                          attrition_report* attrition) {
    attrition_report local;
    attrition_report& at = attrition ? *attrition : local;
    at = attrition_report{};
    at.input_records = static_cast<int64_t>(records.size());

    std::vector<qa_record> train_pool;
    std::vector<const qa_record*> eval_records;
    for (const auto& rec : records) {
        if (rec.split == data_split::train) {
            train_pool.push_back(rec);
        } else {
            eval_records.push_back(&rec);
        }
    }
    at.eval_records = static_cast<int64_t>(eval_records.size());

    std::vector<testbed_record> survivors;
    for (const qa_record* rec : eval_records) {
        std::vector<std::string> spans;
        try {
            spans = split_context_spans(rec->context, rec->answer, cfg.span_words);
        } catch (const data_error&) {
            ++at.no_span;
            continue;
        }
        if (spans.empty()) {
            ++at.no_span;
            continue;
        }

        const std::vector<std::string> golds = {rec->answer};
        // parametric consistency is a property of the question, not the span
        const double r_p = estimate_consistency(
            backend, templates, rec->question, template_kind::parametric, std::nullopt, golds,
            cfg.n, cfg.temperature, derive_seed(cfg.seed, rec->id, "parametric"), cfg.max_tokens);
        const knowledge_class cls = classify_parametric(r_p, cfg.eta);

        for (size_t si = 0; si < spans.size(); ++si) {
            ++at.span_candidates;
            std::string span_id = rec->id;
            if (spans.size() > 1) span_id += "#s" + std::to_string(si);

            if (cls == knowledge_class::discard) {
                ++at.parametric_discarded;
                continue;
            }

            const double r_c = estimate_consistency(
                backend, templates, rec->question, template_kind::contextual, spans[si], golds,
                cfg.n, cfg.temperature, derive_seed(cfg.seed, span_id, "contextual"),
                cfg.max_tokens);
            if (!(r_c > cfg.eta)) {
                ++at.context_not_relevant;
                continue;
            }

            const auto pick = select_irrelevant_context(
                backend, templates, embedder, rec->question, spans[si], golds, train_pool, cfg,
                derive_seed(cfg.seed, span_id, "irrelevant"));
            if (!pick) {
                ++at.no_irrelevant_candidate;
                continue;
            }

            testbed_record out;
            out.id = std::move(span_id);
            out.question = rec->question;
            out.context_pos = spans[si];
            out.context_neg = pick->context;
            out.answer = rec->answer;
            out.p = cls == knowledge_class::has_knowledge ? 1 : 0;
            out.consistency_p = r_p;
            out.consistency_c_pos = r_c;
            out.candidate_rank = pick->rank;
            survivors.push_back(std::move(out));
        }
    }
    at.surviving = static_cast<int64_t>(survivors.size());

    // balance the p groups by seeded downsampling of the larger one
    std::vector<size_t> idx0, idx1;
    for (size_t i = 0; i < survivors.size(); ++i) {
        (survivors[i].p == 0 ? idx0 : idx1).push_back(i);
    }
    const size_t keep = std::min(idx0.size(), idx1.size());
    if (keep == 0) {
        throw data_error(
            "empty testbed: input=" + std::to_string(at.input_records) +
            " eval=" + std::to_string(at.eval_records) + " no_span=" + std::to_string(at.no_span) +
            " spans=" + std::to_string(at.span_candidates) +
            " parametric_discarded=" + std::to_string(at.parametric_discarded) +
            " context_not_relevant=" + std::to_string(at.context_not_relevant) +
            " no_irrelevant_candidate=" + std::to_string(at.no_irrelevant_candidate) +
            " surviving_p0=" + std::to_string(idx0.size()) +
            " surviving_p1=" + std::to_string(idx1.size()));
    }
    rng64 rng(derive_seed(cfg.seed, "testbed", "balance"));
    auto downsample = [&](std::vector<size_t>& idx) {
        rng.shuffle(idx);
        idx.resize(keep);
        std::sort(idx.begin(), idx.end());  // keep input order in the output
    };
    if (idx0.size() > keep) downsample(idx0);
    if (idx1.size() > keep) downsample(idx1);

    std::vector<size_t> kept;
    kept.reserve(2 * keep);
    kept.insert(kept.end(), idx0.begin(), idx0.end());
    kept.insert(kept.end(), idx1.begin(), idx1.end());
    std::sort(kept.begin(), kept.end());

    std::vector<testbed_record> out;
    out.reserve(kept.size());
    for (size_t i : kept) out.push_back(std::move(survivors[i]));
    at.balanced = static_cast<int64_t>(out.size());
    return out;
}

std::vector<eval_instance> expand_eval(const std::vector<testbed_record>& records) {
    std::vector<eval_instance> out;
    out.reserve(2 * records.size());
    for (const auto& rec : records) {
        eval_instance pos;
        pos.id = rec.id + "::pos";
        pos.question = rec.question;
        pos.context = rec.context_pos;
        pos.golds = {rec.answer};
        pos.answerable = true;
        out.push_back(std::move(pos));

        eval_instance neg;
        neg.id = rec.id + "::neg";
        neg.question = rec.question;
        neg.context = rec.context_neg;
        neg.golds = {rec.answer};
        neg.answerable = rec.p == 1;
        out.push_back(std::move(neg));
    }
    return out;
}

}  // namespace abstain

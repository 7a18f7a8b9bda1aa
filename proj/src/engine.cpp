#include "abstain/engine.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "abstain/errors.hpp"

namespace abstain {

std::string_view strategy_name(strategy_kind s) {
    switch (s) {
        case strategy_kind::context_only: return "context";
        case strategy_kind::abstain_prompt: return "abstain";
        case strategy_kind::self_ask: return "self-ask";
        case strategy_kind::cad: return "cad";
        case strategy_kind::acd: return "acd";
        case strategy_kind::acda: return "acd-a";
        case strategy_kind::entropy_threshold: return "entropy";
        case strategy_kind::fsb: return "fsb";
        case strategy_kind::cda: return "cda";
        case strategy_kind::cdam: return "cda-m";
    }
    return "?";
}

std::optional<strategy_kind> parse_strategy(std::string_view name) {
    static constexpr strategy_kind all[] = {
        strategy_kind::context_only, strategy_kind::abstain_prompt, strategy_kind::self_ask,
        strategy_kind::cad,          strategy_kind::acd,            strategy_kind::acda,
        strategy_kind::entropy_threshold, strategy_kind::fsb,       strategy_kind::cda,
        strategy_kind::cdam,
    };
    for (strategy_kind s : all) {
        if (strategy_name(s) == name) return s;
    }
    return std::nullopt;
}

double relevance(double h, double h_null, calibration_form form) {
    if (!(h >= 0.0) || !(h_null >= 0.0)) {
        throw invalid_argument_error("entropies must be finite and non-negative");
    }
    if (h_null == 0.0) return 0.0;  // degenerate: no headroom to calibrate against
    double r = form == calibration_form::reduction ? std::max(h_null - h, 0.0) / h_null
                                                   : std::max(h - h_null, 0.0) / h_null;
    return std::clamp(r, 0.0, 1.0);
}

step_weights normalize_weights(double r_p, double r_c) {
    if (!(r_p >= 0.0 && r_p <= 1.0) || !(r_c >= 0.0 && r_c <= 1.0)) {
        throw invalid_argument_error("relevances must lie in [0, 1]");
    }
    const double s = r_p + r_c;
    if (s == 0.0) return {0.0, 0.0, 1.0};  // no relevant knowledge detected
    const double w_p = (r_p / s) * r_p;
    const double w_c = (r_c / s) * r_c;
    return {w_p, w_c, std::max(0.0, 1.0 - w_p - w_c)};
}

step_weights momentum_update(const step_weights& prev, const step_weights& cur, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw invalid_argument_error("alpha must lie in [0, 1]");
    if (std::abs(prev.sum() - 1.0) > weight_sum_tolerance ||
        std::abs(cur.sum() - 1.0) > weight_sum_tolerance) {
        throw invalid_argument_error("momentum operands must sum to 1");
    }
    return {alpha * prev.w_p + (1.0 - alpha) * cur.w_p,
            alpha * prev.w_c + (1.0 - alpha) * cur.w_c,
            alpha * prev.w_a + (1.0 - alpha) * cur.w_a};
}

decoder::decoder(const lm_backend& backend, const template_set& templates,
                 std::vector<demo> demos, abstention_phrases phrases)
    : backend_(backend),
      templates_(templates),
      demos_(std::move(demos)),
      phrases_(std::move(phrases)) {}

namespace {

// One decode pass over a single instance. Owns the generated-token state and
// the inference-call counter.
struct session {
    const lm_backend& backend;
    const template_set& templates;
    const std::vector<demo>& demos;
    const eval_instance& inst;
    const strategy_config& cfg;

    token_sequence generated = {};
    std::string prefix_text = {};
    int calls = 0;
    int step = 0;

    struct queried {
        logit_vector d;
        double h;
    };

    queried query(template_kind kind, std::optional<std::string_view> candidate = std::nullopt) {
        std::optional<std::string_view> c;
        std::optional<std::string_view> q;
        switch (kind) {
            case template_kind::parametric:
                q = inst.question;
                break;
            case template_kind::contextual:
            case template_kind::abstention:
            case template_kind::verification:
                c = inst.context;
                q = inst.question;
                break;
            default:
                break;  // null kinds take no instance text
        }
        const rendered_prompt rp =
            templates.render(kind, c, q, candidate, demos,
                             kind == template_kind::verification ? "" : prefix_text);
        try {
            const logit_vector d = backend.logits(backend.tokenize(rp.text));
            ++calls;
            return {d, entropy(softmax(d))};
        } catch (const transport_error& e) {
            throw transport_error("step " + std::to_string(step + 1) + ": " + e.what(),
                                  e.attempts, e.retryable);
        } catch (const capacity_error& e) {
            throw capacity_error("step " + std::to_string(step + 1) + ": " + e.what());
        }
    }

    // Appends the token unless it is eos; returns false when decoding stops.
    bool push(token_id token) {
        ++step;
        if (token == backend.eos_id()) return false;
        generated.push_back(token);
        prefix_text = backend.detokenize(generated);
        return step < cfg.max_tokens;
    }

    std::string text() const { return backend.detokenize(generated); }
};

template_kind fsb_pick(double h_p, double h_c, double h_a) {
    // ties: contextual, then abstention, then parametric
    template_kind best = template_kind::contextual;
    double best_h = h_c;
    if (h_a < best_h) {
        best = template_kind::abstention;
        best_h = h_a;
    }
    if (h_p < best_h) best = template_kind::parametric;
    return best;
}

}  // namespace

prediction decoder::decode(const eval_instance& instance, const strategy_config& cfg) const {
    return decode(instance, cfg, weight_override_fn());
}

prediction decoder::decode(const eval_instance& instance, const strategy_config& cfg,
                           const weight_override_fn& override) const {
    if (cfg.max_tokens < 1) throw invalid_argument_error("max_tokens must be >= 1");
    if (instance.question.empty()) throw invalid_argument_error("instance has no question");

    session s{backend_, templates_, demos_, instance, cfg};
    prediction out;

    auto greedy_under = [&](template_kind kind) {
        // single-template greedy loop; records the queried entropy per step
        for (;;) {
            auto [d, h] = s.query(kind);
            const auto token = static_cast<token_id>(argmax(d));
            step_trace tr;
            tr.step = s.step + 1;
            tr.token = token;
            switch (kind) {
                case template_kind::parametric: tr.h_p = h; break;
                case template_kind::contextual: tr.h_c = h; break;
                case template_kind::abstention: tr.h_a = h; break;
                default: break;
            }
            out.trace.push_back(tr);
            if (!s.push(token)) break;
        }
    };

    switch (cfg.strategy) {
        case strategy_kind::context_only:
            greedy_under(template_kind::contextual);
            out.text = s.text();
            out.abstained = is_abstention(out.text, phrases_);
            break;

        case strategy_kind::abstain_prompt:
            greedy_under(template_kind::abstention);
            out.text = s.text();
            out.abstained = is_abstention(out.text, phrases_);
            break;

        case strategy_kind::cad:
            for (;;) {
                auto p = s.query(template_kind::parametric);
                auto c = s.query(template_kind::contextual);
                const auto token = static_cast<token_id>(argmax(cad_mix(p.d, c.d, cfg.cad_w)));
                step_trace tr;
                tr.step = s.step + 1;
                tr.token = token;
                tr.h_p = p.h;
                tr.h_c = c.h;
                out.trace.push_back(tr);
                if (!s.push(token)) break;
            }
            out.text = s.text();
            out.abstained = is_abstention(out.text, phrases_);
            break;

        case strategy_kind::acd:
            for (;;) {
                auto p = s.query(template_kind::parametric);
                auto c = s.query(template_kind::contextual);
                const double w = acd_weight(p.h, c.h);
                const auto token = static_cast<token_id>(argmax(ccd_mix(p.d, c.d, w)));
                step_trace tr;
                tr.step = s.step + 1;
                tr.token = token;
                tr.h_p = p.h;
                tr.h_c = c.h;
                tr.weights = step_weights{1.0 - w, w, 0.0};
                out.trace.push_back(tr);
                if (!s.push(token)) break;
            }
            out.text = s.text();
            out.abstained = is_abstention(out.text, phrases_);
            break;

        case strategy_kind::acda:
            for (;;) {
                auto p = s.query(template_kind::parametric);
                auto c = s.query(template_kind::contextual);
                auto a = s.query(template_kind::abstention);
                const step_weights w = acda_weights(p.h, c.h, a.h);
                const auto token = static_cast<token_id>(argmax(mix_three(w, p.d, c.d, a.d)));
                step_trace tr;
                tr.step = s.step + 1;
                tr.token = token;
                tr.h_p = p.h;
                tr.h_c = c.h;
                tr.h_a = a.h;
                tr.weights = w;
                out.trace.push_back(tr);
                if (!s.push(token)) break;
            }
            out.text = s.text();
            out.abstained = is_abstention(out.text, phrases_);
            break;

        case strategy_kind::cda:
        case strategy_kind::cdam: {
            std::optional<step_weights> prev;
            for (;;) {
                auto p = s.query(template_kind::parametric);
                auto c = s.query(template_kind::contextual);
                auto a = s.query(template_kind::abstention);
                auto np = s.query(template_kind::null_parametric);
                auto nc = s.query(template_kind::null_contextual);

                const double r_p = relevance(p.h, np.h, cfg.calibration);
                const double r_c = relevance(c.h, nc.h, cfg.calibration);
                step_weights w = normalize_weights(r_p, r_c);
                if (cfg.strategy == strategy_kind::cdam && prev) {
                    w = momentum_update(*prev, w, cfg.alpha);
                }
                if (override) w = override(p.h, c.h, a.h);
                prev = w;

                const auto token = static_cast<token_id>(argmax(mix_three(w, p.d, c.d, a.d)));
                step_trace tr;
                tr.step = s.step + 1;
                tr.token = token;
                tr.h_p = p.h;
                tr.h_c = c.h;
                tr.h_a = a.h;
                tr.h_null_p = np.h;
                tr.h_null_c = nc.h;
                tr.r_p = r_p;
                tr.r_c = r_c;
                tr.weights = w;
                out.trace.push_back(tr);
                if (!s.push(token)) break;
            }
            out.text = s.text();
            out.abstained = is_abstention(out.text, phrases_);
            break;
        }

        case strategy_kind::fsb: {
            auto p = s.query(template_kind::parametric);
            auto c = s.query(template_kind::contextual);
            auto a = s.query(template_kind::abstention);
            const template_kind branch = fsb_pick(p.h, c.h, a.h);
            const logit_vector& first =
                branch == template_kind::parametric ? p.d
                : branch == template_kind::contextual ? c.d
                                                      : a.d;
            const auto token = static_cast<token_id>(argmax(first));
            step_trace tr;
            tr.step = 1;
            tr.token = token;
            tr.h_p = p.h;
            tr.h_c = c.h;
            tr.h_a = a.h;
            out.trace.push_back(tr);
            if (s.push(token)) greedy_under(branch);
            out.text = s.text();
            out.abstained = is_abstention(out.text, phrases_);
            break;
        }

        case strategy_kind::entropy_threshold: {
            greedy_under(template_kind::contextual);
            std::vector<double> hs;
            hs.reserve(out.trace.size());
            for (const auto& tr : out.trace) hs.push_back(*tr.h_c);
            const double agg = aggregate_entropy(cfg.variant, hs);
            out.text = s.text();
            if (agg > cfg.entropy_threshold) {
                out.text = std::string(canonical_abstention);
                out.abstained = true;
            } else {
                out.abstained = is_abstention(out.text, phrases_);
            }
            break;
        }

        case strategy_kind::self_ask: {
            greedy_under(template_kind::contextual);
            out.text = s.text();
            // verification pass over the initial generation
            token_sequence verdict;
            std::string verdict_text;
            for (int vstep = 0; vstep < cfg.max_tokens; ++vstep) {
                const rendered_prompt rp = templates_.render(
                    template_kind::verification, instance.context, instance.question, out.text,
                    demos_, verdict_text);
                const logit_vector d = backend_.logits(backend_.tokenize(rp.text));
                ++s.calls;
                const auto token = static_cast<token_id>(argmax(d));
                if (token == backend_.eos_id()) break;
                verdict.push_back(token);
                verdict_text = backend_.detokenize(verdict);
            }
            out.abstained = contains_unknown_token(verdict_text);
            break;
        }
    }

    out.inference_calls = s.calls;
    return out;
}

std::vector<prediction> decode_batch(const decoder& dec,
                                     const std::vector<eval_instance>& instances,
                                     const strategy_config& cfg, int jobs) {
    std::vector<prediction> results(instances.size());
    const bool parallel_ok = dec.backend().caps().concurrent_safe;
    const int workers =
        std::max(1, std::min<int>(parallel_ok ? jobs : 1, static_cast<int>(instances.size())));

    if (workers == 1) {
        for (size_t i = 0; i < instances.size(); ++i) results[i] = dec.decode(instances[i], cfg);
        return results;
    }

    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (size_t i = static_cast<size_t>(w); i < instances.size();
                     i += static_cast<size_t>(workers)) {
                    results[i] = dec.decode(instances[i], cfg);
                }
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

}  // namespace abstain

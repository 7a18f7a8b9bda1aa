#include <doctest.h>

#include <atomic>
#include <cmath>

#include "abstain/engine.hpp"
#include "abstain/errors.hpp"
#include "mock_worlds.hpp"

using namespace abstain;
using worlds::make_quadrant_world;
using worlds::make_random_world;
using worlds::vocab_builder;

namespace {

// counts logits calls and tracks overlap, reporting a configurable
// concurrency capability
class instrumented_lm final : public lm_backend {
public:
    instrumented_lm(const table_lm& inner, bool concurrent_safe)
        : inner_(inner), concurrent_safe_(concurrent_safe) {}

    size_t vocab_size() const override { return inner_.vocab_size(); }
    token_id eos_id() const override { return inner_.eos_id(); }
    backend_caps caps() const override {
        return {concurrent_safe_, inner_.caps().max_context_tokens};
    }
    logit_vector logits(std::span<const token_id> prefix) const override {
        const int now = in_flight_.fetch_add(1) + 1;
        int seen = max_in_flight_.load();
        while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
        }
        ++calls_;
        logit_vector out = inner_.logits(prefix);
        in_flight_.fetch_sub(1);
        return out;
    }
    token_sequence tokenize(std::string_view text) const override {
        return inner_.tokenize(text);
    }
    std::string detokenize(std::span<const token_id> tokens) const override {
        return inner_.detokenize(tokens);
    }

    int calls() const { return calls_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }

private:
    const table_lm& inner_;
    bool concurrent_safe_;
    mutable std::atomic<int> in_flight_{0};
    mutable std::atomic<int> max_in_flight_{0};
    mutable std::atomic<int> calls_{0};
};

std::vector<token_id> trace_tokens(const prediction& p) {
    std::vector<token_id> out;
    for (const auto& tr : p.trace) out.push_back(tr.token);
    return out;
}

}  // namespace

TEST_CASE("relevance forms and endpoints") {
    const double h_null = std::log(4.0);
    CHECK(relevance(0.0, h_null, calibration_form::reduction) == 1.0);
    CHECK(relevance(h_null, h_null, calibration_form::reduction) == 0.0);
    CHECK(relevance(0.3, 1.2, calibration_form::reduction) ==
          doctest::Approx(0.75).epsilon(1e-15));
    // entropy above the null clamps at zero under reduction
    CHECK(relevance(2.0 * h_null, h_null, calibration_form::reduction) == 0.0);

    // as-printed: grows when the prompted entropy exceeds the null
    CHECK(relevance(0.0, h_null, calibration_form::as_printed) == 0.0);
    CHECK(relevance(1.5, 1.0, calibration_form::as_printed) ==
          doctest::Approx(0.5).epsilon(1e-15));
    CHECK(relevance(5.0, 1.0, calibration_form::as_printed) == 1.0);  // clamped

    // degenerate null: already certain, no headroom
    CHECK(relevance(0.5, 0.0, calibration_form::reduction) == 0.0);
    CHECK_THROWS_AS(relevance(-0.1, 1.0, calibration_form::reduction), invalid_argument_error);
}

TEST_CASE("normalize_weights endpoints and hand case") {
    CHECK(normalize_weights(0, 0) == step_weights{0, 0, 1});
    CHECK(normalize_weights(1, 0) == step_weights{1, 0, 0});
    CHECK(normalize_weights(0, 1) == step_weights{0, 1, 0});
    CHECK(normalize_weights(1, 1) == step_weights{0.5, 0.5, 0});
    CHECK(normalize_weights(0.5, 0.5) == step_weights{0.25, 0.25, 0.5});
    CHECK_THROWS_AS(normalize_weights(1.5, 0.0), invalid_argument_error);
}

TEST_CASE("normalize_weights stays on the simplex over the unit square") {
    for (int i = 0; i < 200; ++i) {
        for (int j = 0; j < 200; ++j) {
            const double r_p = i / 199.0;
            const double r_c = j / 199.0;
            const step_weights w = normalize_weights(r_p, r_c);
            CHECK(w.w_p >= 0.0);
            CHECK(w.w_p <= 1.0);
            CHECK(w.w_c >= 0.0);
            CHECK(w.w_c <= 1.0);
            CHECK(w.w_a >= 0.0);
            CHECK(w.w_a <= 1.0);
            CHECK(std::abs(w.sum() - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("momentum_update") {
    const step_weights prev{0.2, 0.3, 0.5};
    const step_weights cur{0.6, 0.2, 0.2};

    CHECK(momentum_update(prev, cur, 0.0) == cur);   // bitwise identity
    CHECK(momentum_update(prev, cur, 1.0) == prev);  // freeze

    const step_weights mixed = momentum_update(prev, cur, 0.7);
    CHECK(std::abs(mixed.w_p - 0.32) <= 1e-12);
    CHECK(std::abs(mixed.w_c - 0.27) <= 1e-12);
    CHECK(std::abs(mixed.w_a - 0.41) <= 1e-12);

    CHECK_THROWS_AS(momentum_update(prev, cur, 1.5), invalid_argument_error);
    CHECK_THROWS_AS(momentum_update({0.5, 0.5, 0.5}, cur, 0.5), invalid_argument_error);

    rng64 rng(8);
    for (int it = 0; it < 2000; ++it) {
        const step_weights a = normalize_weights(rng.uniform01(), rng.uniform01());
        const step_weights b = normalize_weights(rng.uniform01(), rng.uniform01());
        const step_weights m = momentum_update(a, b, rng.uniform01());
        CHECK(std::abs(m.sum() - 1.0) <= 1e-12);
        CHECK(m.w_p >= -1e-12);
        CHECK(m.w_c >= -1e-12);
        CHECK(m.w_a >= -1e-12);
    }
}

TEST_CASE("cda step: certain context, uniform elsewhere") {
    const template_set t;
    vocab_builder vb(t);
    vb.add("q0?");
    vb.add("ctx0;");
    vb.add("gold0.");
    const std::string m_c = t.kind_marker(template_kind::contextual);

    std::vector<table_rule> rules;
    rules.push_back({{m_c, "q0?", "ctx0;"}, "gold0.",
                     logit_vector(vb.one_hot(vb.eos_text()))});
    rules.push_back({{m_c, "q0?", "ctx0;"}, "", logit_vector(vb.one_hot("gold0."))});
    table_lm lm(vb.build(), std::move(rules), logit_vector(vb.uniform()));

    eval_instance inst;
    inst.id = "i0";
    inst.question = "q0?";
    inst.context = "ctx0;";
    inst.golds = {"gold0."};

    strategy_config cfg;
    cfg.strategy = strategy_kind::cda;
    const decoder dec(lm, t);
    const prediction pred = dec.decode(inst, cfg);

    REQUIRE(pred.trace.size() == 2);
    const step_trace& s1 = pred.trace.front();
    CHECK(*s1.r_c == 1.0);
    CHECK(*s1.r_p == 0.0);
    CHECK(*s1.weights == step_weights{0, 1, 0});
    CHECK(*s1.h_c == 0.0);
    CHECK(pred.text == "gold0.");
    CHECK_FALSE(pred.abstained);
    CHECK(pred.inference_calls == 10);  // five prompts per step, two steps
}

TEST_CASE("cda step: everything uniform routes to the abstention distribution") {
    const template_set t;
    vocab_builder vb(t);
    vb.add("q0?");
    vb.add("ctx0;");
    table_lm lm(vb.build(), {}, logit_vector(vb.uniform()));

    eval_instance inst;
    inst.id = "i0";
    inst.question = "q0?";
    inst.context = "ctx0;";
    inst.golds = {"x"};

    strategy_config cfg;
    cfg.strategy = strategy_kind::cda;
    cfg.max_tokens = 1;
    const decoder dec(lm, t);
    const prediction pred = dec.decode(inst, cfg);

    REQUIRE(pred.trace.size() == 1);  // max_tokens=1 yields exactly one step
    CHECK(*pred.trace[0].weights == step_weights{0, 0, 1});
    CHECK(pred.trace[0].token == 0);  // argmax of the uniform abstention logits
    CHECK(pred.inference_calls == 5);
}

TEST_CASE("quadrant world: cda and cda-m answer or abstain by construction") {
    const template_set t;
    const auto world = make_quadrant_world(t, 3);
    const decoder dec(*world.lm, t);

    for (strategy_kind s : {strategy_kind::cda, strategy_kind::cdam}) {
        strategy_config cfg;
        cfg.strategy = s;
        for (const auto& inst : world.instances) {
            const prediction pred = dec.decode(inst, cfg);
            CAPTURE(inst.id);
            if (inst.answerable) {
                CHECK(classify_outcome({pred.text, pred.abstained}, inst) == outcome_bucket::n1);
            } else {
                CHECK(pred.text == "unknown");
                CHECK(pred.abstained);
                CHECK(classify_outcome({pred.text, pred.abstained}, inst) == outcome_bucket::n5);
            }
        }
    }
}

TEST_CASE("cda-m with alpha 0 reproduces the cda trace exactly") {
    const template_set t;
    const auto world = make_random_world(t, 911);
    const decoder dec(*world.lm, t);

    strategy_config cda_cfg;
    cda_cfg.strategy = strategy_kind::cda;
    cda_cfg.max_tokens = 8;
    strategy_config cdam_cfg = cda_cfg;
    cdam_cfg.strategy = strategy_kind::cdam;
    cdam_cfg.alpha = 0.0;

    const prediction a = dec.decode(world.instance, cda_cfg);
    const prediction b = dec.decode(world.instance, cdam_cfg);
    REQUIRE(a.trace.size() == b.trace.size());
    for (size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].token == b.trace[i].token);
        CHECK(*a.trace[i].weights == *b.trace[i].weights);
        CHECK(*a.trace[i].h_p == *b.trace[i].h_p);
        CHECK(*a.trace[i].r_p == *b.trace[i].r_p);
    }
    CHECK(a.text == b.text);
}

TEST_CASE("cda-m with alpha 1 freezes the first step weights") {
    const template_set t;
    const auto world = make_random_world(t, 313);
    const decoder dec(*world.lm, t);

    strategy_config cfg;
    cfg.strategy = strategy_kind::cdam;
    cfg.alpha = 1.0;
    cfg.max_tokens = 6;
    const prediction pred = dec.decode(world.instance, cfg);
    REQUIRE(!pred.trace.empty());
    const step_weights first = *pred.trace.front().weights;
    for (const auto& tr : pred.trace) CHECK(*tr.weights == first);
}

TEST_CASE("acd strategy equals cda with forced (1-w, w, 0) weights") {
    const template_set t;
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const auto world = make_random_world(t, seed);
        const decoder dec(*world.lm, t);

        strategy_config acd_cfg;
        acd_cfg.strategy = strategy_kind::acd;
        acd_cfg.max_tokens = 8;
        const prediction acd_pred = dec.decode(world.instance, acd_cfg);

        strategy_config forced_cfg;
        forced_cfg.strategy = strategy_kind::cda;
        forced_cfg.max_tokens = 8;
        const prediction forced_pred = dec.decode(
            world.instance, forced_cfg, [](double h_p, double h_c, double) {
                const double w = acd_weight(h_p, h_c);
                return step_weights{1.0 - w, w, 0.0};
            });

        CHECK(trace_tokens(acd_pred) == trace_tokens(forced_pred));
        CHECK(acd_pred.text == forced_pred.text);
    }
}

TEST_CASE("fsb picks the most certain template and sticks with it") {
    const template_set t;
    const std::string m_p = t.kind_marker(template_kind::parametric);
    const std::string m_c = t.kind_marker(template_kind::contextual);
    const std::string m_a = t.kind_marker(template_kind::abstention);

    const auto build = [&](bool p_certain, bool c_certain, bool a_certain) {
        vocab_builder vb(t);
        vb.add("q0?");
        vb.add("ctx0;");
        vb.add("gp.");
        vb.add("gc.");
        vb.add("ga.");
        std::vector<table_rule> rules;
        if (p_certain) rules.push_back({{m_p, "q0?"}, "", logit_vector(vb.one_hot("gp."))});
        if (c_certain) rules.push_back({{m_c, "q0?"}, "", logit_vector(vb.one_hot("gc."))});
        if (a_certain) rules.push_back({{m_a, "q0?"}, "", logit_vector(vb.one_hot("ga."))});
        return table_lm(vb.build(), std::move(rules), logit_vector(vb.uniform()));
    };

    eval_instance inst;
    inst.id = "i0";
    inst.question = "q0?";
    inst.context = "ctx0;";
    inst.golds = {"gc."};

    strategy_config cfg;
    cfg.strategy = strategy_kind::fsb;
    cfg.max_tokens = 1;

    // contextual strictly most certain
    {
        const table_lm lm = build(false, true, false);
        const decoder dec(lm, t);
        const prediction pred = dec.decode(inst, cfg);
        CHECK(pred.text == "gc.");
        CHECK(pred.inference_calls == 3);
    }
    // exact tie between contextual and abstention: contextual wins
    {
        const table_lm lm = build(false, true, true);
        const decoder dec(lm, t);
        CHECK(dec.decode(inst, cfg).text == "gc.");
    }
    // exact tie between parametric and abstention: abstention wins
    {
        const table_lm lm = build(true, false, true);
        const decoder dec(lm, t);
        CHECK(dec.decode(inst, cfg).text == "ga.");
    }
    // parametric alone certain
    {
        const table_lm lm = build(true, false, false);
        const decoder dec(lm, t);
        CHECK(dec.decode(inst, cfg).text == "gp.");
    }
}

TEST_CASE("entropy threshold strategy substitutes the canonical abstention") {
    const template_set t;
    vocab_builder vb(t);
    vb.add("q0?");
    vb.add("ctx0;");
    vb.add("gold0.");
    const std::string m_c = t.kind_marker(template_kind::contextual);

    std::vector<table_rule> rules;
    rules.push_back({{m_c, "q0?"}, "gold0.", logit_vector(vb.one_hot(vb.eos_text()))});
    rules.push_back({{m_c, "q0?"}, "", logit_vector(vb.one_hot("gold0."))});
    const table_lm lm(vb.build(), std::move(rules), logit_vector(vb.uniform()));

    eval_instance inst;
    inst.id = "i0";
    inst.question = "q0?";
    inst.context = "ctx0;";
    inst.golds = {"gold0."};

    const decoder dec(lm, t);
    strategy_config cfg;
    cfg.strategy = strategy_kind::entropy_threshold;
    cfg.variant = entropy_variant::first_token;

    cfg.entropy_threshold = 0.5;  // h_c is exactly 0: stay
    const prediction keep = dec.decode(inst, cfg);
    CHECK(keep.text == "gold0.");
    CHECK_FALSE(keep.abstained);

    cfg.entropy_threshold = -1.0;  // aggregate always exceeds: abstain
    const prediction drop = dec.decode(inst, cfg);
    CHECK(drop.text == "unknown");
    CHECK(drop.abstained);
}

TEST_CASE("self-ask abstains when the verifier says unknown") {
    const template_set t;
    const std::string m_c = t.kind_marker(template_kind::contextual);
    const std::string m_v = t.kind_marker(template_kind::verification);

    const auto build = [&](const std::string& verdict_token) {
        vocab_builder vb(t);
        vb.add("q0?");
        vb.add("ctx0;");
        vb.add("gold0.");
        vb.add("known");
        std::vector<table_rule> rules;
        rules.push_back({{m_c, "q0?"}, "gold0.", logit_vector(vb.one_hot(vb.eos_text()))});
        rules.push_back({{m_c, "q0?"}, "", logit_vector(vb.one_hot("gold0."))});
        rules.push_back({{m_v, "q0?"}, verdict_token, logit_vector(vb.one_hot(vb.eos_text()))});
        rules.push_back({{m_v, "q0?"}, "", logit_vector(vb.one_hot(verdict_token))});
        return table_lm(vb.build(), std::move(rules), logit_vector(vb.uniform()));
    };

    eval_instance inst;
    inst.id = "i0";
    inst.question = "q0?";
    inst.context = "ctx0;";
    inst.golds = {"gold0."};

    strategy_config cfg;
    cfg.strategy = strategy_kind::self_ask;

    {
        const table_lm lm = build("unknown");
        const decoder dec(lm, t);
        const prediction pred = dec.decode(inst, cfg);
        CHECK(pred.text == "gold0.");  // the initial generation is kept
        CHECK(pred.abstained);
        CHECK(pred.inference_calls == 4);  // two answer steps + two verification steps
    }
    {
        const table_lm lm = build("known");
        const decoder dec(lm, t);
        const prediction pred = dec.decode(inst, cfg);
        CHECK(pred.text == "gold0.");
        CHECK_FALSE(pred.abstained);
    }
}

TEST_CASE("context strategy does not abstain without abstention phrases") {
    const template_set t;
    const auto world = make_quadrant_world(t, 2);
    const decoder dec(*world.lm, t);

    strategy_config cfg;
    cfg.strategy = strategy_kind::context_only;
    for (const auto& inst : world.instances) {
        const prediction pred = dec.decode(inst, cfg);
        if (!is_abstention(pred.text)) CHECK_FALSE(pred.abstained);
    }
}

TEST_CASE("inference call accounting per strategy") {
    const template_set t;
    const auto world = make_quadrant_world(t, 1);
    const decoder dec(*world.lm, t);
    const eval_instance& inst = world.instances.back();  // P=1, C=1: two steps to eos

    const auto calls_for = [&](strategy_kind s) {
        strategy_config cfg;
        cfg.strategy = s;
        const prediction pred = dec.decode(inst, cfg);
        return std::pair<int, int>(pred.inference_calls, static_cast<int>(pred.trace.size()));
    };

    {
        const auto [calls, k] = calls_for(strategy_kind::cda);
        CHECK(calls == 5 * k);
    }
    {
        const auto [calls, k] = calls_for(strategy_kind::cdam);
        CHECK(calls == 5 * k);
    }
    {
        const auto [calls, k] = calls_for(strategy_kind::context_only);
        CHECK(calls == k);
    }
    {
        const auto [calls, k] = calls_for(strategy_kind::abstain_prompt);
        CHECK(calls == k);
    }
    {
        const auto [calls, k] = calls_for(strategy_kind::cad);
        CHECK(calls == 2 * k);
    }
    {
        const auto [calls, k] = calls_for(strategy_kind::acd);
        CHECK(calls == 2 * k);
    }
    {
        const auto [calls, k] = calls_for(strategy_kind::acda);
        CHECK(calls == 3 * k);
    }
    {
        const auto [calls, k] = calls_for(strategy_kind::fsb);
        CHECK(calls == k + 2);  // three first-step probes, one call per later step
    }
}

TEST_CASE("decode rejects zero max_tokens and empty questions") {
    const template_set t;
    const auto world = make_quadrant_world(t, 1);
    const decoder dec(*world.lm, t);

    strategy_config cfg;
    cfg.strategy = strategy_kind::cda;
    cfg.max_tokens = 0;
    CHECK_THROWS_AS(dec.decode(world.instances[0], cfg), invalid_argument_error);

    cfg.max_tokens = 4;
    eval_instance no_question = world.instances[0];
    no_question.question.clear();
    CHECK_THROWS_AS(dec.decode(no_question, cfg), invalid_argument_error);
}

TEST_CASE("chosen tokens are invariant to a constant logit offset") {
    const template_set t;
    for (strategy_kind s : {strategy_kind::cda, strategy_kind::acd, strategy_kind::fsb}) {
        const auto base = make_random_world(t, 555);
        const auto shifted = make_random_world(t, 555, 8, 2.5);
        strategy_config cfg;
        cfg.strategy = s;
        cfg.max_tokens = 8;
        const prediction a = decoder(*base.lm, t).decode(base.instance, cfg);
        const prediction b = decoder(*shifted.lm, t).decode(shifted.instance, cfg);
        CAPTURE(strategy_name(s));
        CHECK(trace_tokens(a) == trace_tokens(b));
    }
}

TEST_CASE("a non-concurrent backend is never called from two threads at once") {
    const template_set t;
    const auto world = make_quadrant_world(t, 4);

    instrumented_lm guarded(*world.lm, false);
    const decoder dec(guarded, t);
    strategy_config cfg;
    cfg.strategy = strategy_kind::cda;

    const auto preds = decode_batch(dec, world.instances, cfg, 8);
    CHECK(preds.size() == world.instances.size());
    CHECK(guarded.max_in_flight() == 1);
    CHECK(guarded.calls() > 0);
}

TEST_CASE("parallel decoding matches sequential results") {
    const template_set t;
    const auto world = make_quadrant_world(t, 4);

    instrumented_lm open(*world.lm, true);
    const decoder dec(open, t);
    strategy_config cfg;
    cfg.strategy = strategy_kind::cdam;

    const auto sequential = decode_batch(dec, world.instances, cfg, 1);
    const auto parallel = decode_batch(dec, world.instances, cfg, 8);
    REQUIRE(sequential.size() == parallel.size());
    for (size_t i = 0; i < sequential.size(); ++i) {
        CHECK(sequential[i].text == parallel[i].text);
        CHECK(sequential[i].abstained == parallel[i].abstained);
        CHECK(sequential[i].inference_calls == parallel[i].inference_calls);
    }
}

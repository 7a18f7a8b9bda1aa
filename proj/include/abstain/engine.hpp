#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "abstain/backend.hpp"
#include "abstain/dist.hpp"
#include "abstain/judge.hpp"
#include "abstain/prompt.hpp"

namespace abstain {

enum class strategy_kind {
    context_only,
    abstain_prompt,
    self_ask,
    cad,
    acd,
    acda,
    entropy_threshold,
    fsb,
    cda,
    cdam,
};

std::string_view strategy_name(strategy_kind s);
std::optional<strategy_kind> parse_strategy(std::string_view name);

// Calibrated relevance: the default form measures how much the prompted
// entropy drops below the null-prompt entropy. The as-printed form keeps the
// opposite orientation for fidelity experiments.
enum class calibration_form { reduction, as_printed };

struct strategy_config {
    strategy_kind strategy = strategy_kind::cda;
    double alpha = 0.7;          // momentum weight, cda-m only
    double cad_w = 1.0;          // context amplification weight, cad only
    entropy_variant variant = entropy_variant::first_token;
    double entropy_threshold = 0.0;
    calibration_form calibration = calibration_form::reduction;
    int max_tokens = 32;
};

// Per-step record: entropies of the queried distributions, calibrated
// relevances, final mixing weights, and the chosen token. Fields a strategy
// does not compute stay absent.
struct step_trace {
    int step = 0;
    token_id token = 0;
    std::optional<double> h_p;
    std::optional<double> h_c;
    std::optional<double> h_a;
    std::optional<double> h_null_p;
    std::optional<double> h_null_c;
    std::optional<double> r_p;
    std::optional<double> r_c;
    std::optional<step_weights> weights;
};

struct prediction {
    std::string text;
    bool abstained = false;
    std::vector<step_trace> trace;
    int inference_calls = 0;
};

// r = clamp(max(h_null - h, 0) / h_null, 0, 1) under reduction;
// r = clamp(max(h - h_null, 0) / h_null, 0, 1) as printed.
// h_null = 0 degenerates to 0: the null prompt is already certain.
double relevance(double h, double h_null, calibration_form form);

// w_p = (r_p / (r_p + r_c)) * r_p, w_c likewise, w_a = 1 - w_p - w_c.
// Both relevances zero puts all weight on abstention.
step_weights normalize_weights(double r_p, double r_c);

// Convex smoothing with the previous step's weights.
step_weights momentum_update(const step_weights& prev, const step_weights& cur, double alpha);

class decoder {
public:
    decoder(const lm_backend& backend, const template_set& templates,
            std::vector<demo> demos = {},
            abstention_phrases phrases = abstention_phrases());

    prediction decode(const eval_instance& instance, const strategy_config& cfg) const;

    // Test seam: replaces the calibrated weight computation of a cda/cda-m
    // step with an arbitrary function of the three prompt entropies.
    using weight_override_fn = std::function<step_weights(double h_p, double h_c, double h_a)>;
    prediction decode(const eval_instance& instance, const strategy_config& cfg,
                      const weight_override_fn& override) const;

    const lm_backend& backend() const noexcept { return backend_; }

private:
    const lm_backend& backend_;
    const template_set& templates_;
    std::vector<demo> demos_;
    abstention_phrases phrases_;
};

// Decodes a batch, optionally across threads. A backend that is not
// concurrent-safe is never called from more than one thread at a time.
// Results are ordered by instance index regardless of scheduling.
std::vector<prediction> decode_batch(const decoder& dec,
                                     const std::vector<eval_instance>& instances,
                                     const strategy_config& cfg, int jobs = 1);

// Canonical abstention string substituted by threshold-forced strategies.
inline constexpr std::string_view canonical_abstention = "unknown";

}  // namespace abstain

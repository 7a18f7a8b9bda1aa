#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "abstain/dist.hpp"
#include "abstain/judge.hpp"

namespace abstain {

struct confusion_counts {
    int64_t n1 = 0;
    int64_t n2 = 0;
    int64_t n3 = 0;
    int64_t n4 = 0;
    int64_t n5 = 0;

    int64_t total() const noexcept { return n1 + n2 + n3 + n4 + n5; }
    bool operator==(const confusion_counts&) const = default;
};

struct metrics_report {
    double f1_ans = 0.0;
    double f1_abs = 0.0;
    double rs = 0.0;
    double acc = 0.0;
    double cov = 0.0;
    double answer_rate = 0.0;
    confusion_counts counts;
};

confusion_counts count_confusion(std::span<const outcome_bucket> outcomes);

// Precision N1/(N1+N2+N4), recall N1/(N1+N2+N3); 0 when undefined.
double f1_ans(const confusion_counts& c);

// Precision N5/(N3+N5), recall N5/(N4+N5); 0 when undefined.
double f1_abs(const confusion_counts& c);

// RS = alpha * Cov + (1 - alpha) * Acc with alpha the answer rate.
// Acc = N1/N, Cov = (N1+N3+N5)/N, alpha = 1 - (N3+N5)/N.
metrics_report make_report(const confusion_counts& c);

// One train-set observation for threshold tuning: the aggregated entropy of
// the decoded answer, the bucket it lands in if answered, and answerability.
struct threshold_trace {
    double aggregate = 0.0;
    outcome_bucket if_answered = outcome_bucket::n2;
    bool answerable = true;
};

// Sweeps every observed aggregate plus -inf/+inf sentinels, simulating
// "abstain iff aggregate > threshold", and returns the RS-maximizing
// threshold. When never abstaining ties the best RS the +inf sentinel is
// returned; other ties resolve to the smallest candidate.
double tune_entropy_threshold(std::span<const threshold_trace> traces);

}  // namespace abstain

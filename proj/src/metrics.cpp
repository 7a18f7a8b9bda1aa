#include "abstain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "abstain/errors.hpp"

namespace abstain {

confusion_counts count_confusion(std::span<const outcome_bucket> outcomes) {
    confusion_counts c;
    for (outcome_bucket b : outcomes) {
        switch (b) {
            case outcome_bucket::n1: ++c.n1; break;
            case outcome_bucket::n2: ++c.n2; break;
            case outcome_bucket::n3: ++c.n3; break;
            case outcome_bucket::n4: ++c.n4; break;
            case outcome_bucket::n5: ++c.n5; break;
        }
    }
    return c;
}

static double harmonic_f1(int64_t tp, int64_t p_den, int64_t r_den) {
    if (tp == 0 || p_den == 0 || r_den == 0) return 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(p_den);
    const double r = static_cast<double>(tp) / static_cast<double>(r_den);
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

double f1_ans(const confusion_counts& c) {
    return harmonic_f1(c.n1, c.n1 + c.n2 + c.n4, c.n1 + c.n2 + c.n3);
}

double f1_abs(const confusion_counts& c) {
    return harmonic_f1(c.n5, c.n3 + c.n5, c.n4 + c.n5);
}

metrics_report make_report(const confusion_counts& c) {
    const int64_t n = c.total();
    if (n == 0) throw invalid_argument_error("cannot report metrics over an empty instance set");
    metrics_report r;
    r.counts = c;
    r.f1_ans = f1_ans(c);
    r.f1_abs = f1_abs(c);
    const double dn = static_cast<double>(n);
    r.acc = static_cast<double>(c.n1) / dn;
    r.cov = static_cast<double>(c.n1 + c.n3 + c.n5) / dn;
    r.answer_rate = 1.0 - static_cast<double>(c.n3 + c.n5) / dn;
    r.rs = r.answer_rate * r.cov + (1.0 - r.answer_rate) * r.acc;
    return r;
}

double tune_entropy_threshold(std::span<const threshold_trace> traces) {
    if (traces.empty()) throw invalid_argument_error("no traces to tune a threshold on");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> candidates;
    candidates.reserve(traces.size() + 2);
    candidates.push_back(-inf);
    for (const auto& t : traces) candidates.push_back(t.aggregate);
    candidates.push_back(inf);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    auto rs_at = [&](double threshold) {
        confusion_counts c;
        for (const auto& t : traces) {
            outcome_bucket b = t.aggregate > threshold
                                   ? (t.answerable ? outcome_bucket::n3 : outcome_bucket::n5)
                                   : t.if_answered;
            switch (b) {
                case outcome_bucket::n1: ++c.n1; break;
                case outcome_bucket::n2: ++c.n2; break;
                case outcome_bucket::n3: ++c.n3; break;
                case outcome_bucket::n4: ++c.n4; break;
                case outcome_bucket::n5: ++c.n5; break;
            }
        }
        return make_report(c).rs;
    };

    double best_threshold = candidates.front();
    double best_rs = rs_at(best_threshold);
    for (size_t i = 1; i < candidates.size(); ++i) {
        const double rs = rs_at(candidates[i]);
        if (rs > best_rs) {
            best_rs = rs;
            best_threshold = candidates[i];
        }
    }
    // RS is piecewise constant between observed aggregates, so this sweep is
    // exact. Never-abstain is the canonical representative of its tie class.
    if (rs_at(inf) == best_rs) return inf;
    return best_threshold;
}

}  // namespace abstain

#include "abstain/dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abstain/errors.hpp"

namespace abstain {

logit_vector::logit_vector(std::vector<double> values) : v_(std::move(values)) {
    for (double x : v_) {
        if (!std::isfinite(x)) throw invalid_input_error("logit vector contains a non-finite entry");
    }
}

prob_vector::prob_vector(std::vector<double> values) : v_(std::move(values)) {
    double sum = 0.0;
    for (double x : v_) {
        if (!(x >= 0.0 && x <= 1.0)) throw invalid_input_error("probability entry outside [0, 1]");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw invalid_input_error("probabilities do not sum to 1");
}

prob_vector softmax(const logit_vector& logits, double temperature) {
    if (!(temperature > 0.0)) throw invalid_argument_error("softmax temperature must be > 0");
    if (logits.size() == 0) throw invalid_input_error("softmax of an empty vector");

    std::vector<double> scaled(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;

    const double peak = *std::max_element(scaled.begin(), scaled.end());
    double z = 0.0;
    for (double& x : scaled) {
        x = std::exp(x - peak);
        z += x;
    }
    for (double& x : scaled) x /= z;
    return prob_vector(std::move(scaled));
}

double entropy(const prob_vector& p) {
    double h = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i];
        if (pi > 0.0) h -= pi * std::log(pi);
    }
    return h;
}

size_t argmax(const logit_vector& d) {
    if (d.size() == 0) throw invalid_input_error("argmax of an empty vector");
    return static_cast<size_t>(
        std::max_element(d.values().begin(), d.values().end()) - d.values().begin());
}

static void check_same_shape(const logit_vector& a, const logit_vector& b) {
    if (a.size() != b.size()) throw shape_error("logit vectors differ in length");
}

logit_vector mix_three(const step_weights& w, const logit_vector& d_p,
                       const logit_vector& d_c, const logit_vector& d_a) {
    check_same_shape(d_p, d_c);
    check_same_shape(d_p, d_a);
    if (std::abs(w.sum() - 1.0) > weight_sum_tolerance) {
        throw invalid_argument_error("mixing weights do not sum to 1");
    }
    std::vector<double> out(d_p.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = w.w_p * d_p[i] + w.w_c * d_c[i] + w.w_a * d_a[i];
    }
    return logit_vector(std::move(out));
}

logit_vector ccd_mix(const logit_vector& d_p, const logit_vector& d_c, double w_c) {
    check_same_shape(d_p, d_c);
    std::vector<double> out(d_p.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = d_p[i] + w_c * (d_c[i] - d_p[i]);
    return logit_vector(std::move(out));
}

logit_vector cad_mix(const logit_vector& d_p, const logit_vector& d_c, double w) {
    check_same_shape(d_p, d_c);
    std::vector<double> out(d_p.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = d_c[i] + w * (d_c[i] - d_p[i]);
    return logit_vector(std::move(out));
}

double acd_weight(double h_p, double h_c) {
    if (h_p < 0.0 || h_c < 0.0) throw invalid_argument_error("entropies must be non-negative");
    const double s = h_p + h_c;
    if (s == 0.0) return 0.5;  // no information to prefer either source
    return 1.0 - h_c / s;
}

step_weights acda_weights(double h_p, double h_c, double h_a) {
    if (h_p < 0.0 || h_c < 0.0 || h_a < 0.0) {
        throw invalid_argument_error("entropies must be non-negative");
    }
    const double s = h_p + h_c + h_a;
    if (s == 0.0) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    const double w_c = 1.0 - h_c / s;
    const double w_a = 1.0 - h_a / s;
    return {1.0 - w_c - w_a, w_c, w_a};
}

double aggregate_entropy(entropy_variant variant, std::span<const double> step_entropies) {
    if (step_entropies.empty()) throw invalid_argument_error("no step entropies to aggregate");
    switch (variant) {
        case entropy_variant::first_token:
            return step_entropies.front();
        case entropy_variant::average:
            return std::accumulate(step_entropies.begin(), step_entropies.end(), 0.0) /
                   static_cast<double>(step_entropies.size());
        case entropy_variant::max:
            return *std::max_element(step_entropies.begin(), step_entropies.end());
        case entropy_variant::min:
            return *std::min_element(step_entropies.begin(), step_entropies.end());
    }
    throw invalid_argument_error("unknown entropy variant");
}

}  // namespace abstain

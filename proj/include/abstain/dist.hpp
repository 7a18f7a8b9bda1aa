#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace abstain {

// Dense real vector of log-odds over a vocabulary. All entries are finite
// by construction; vectors combined in one mix must share a length.
class logit_vector {
public:
    logit_vector() = default;
    explicit logit_vector(std::vector<double> values);

    size_t size() const noexcept { return v_.size(); }
    double operator[](size_t i) const { return v_[i]; }
    const std::vector<double>& values() const noexcept { return v_; }

    bool operator==(const logit_vector&) const = default;

private:
    std::vector<double> v_;
};

// Probability vector: entries in [0, 1], summing to 1 within 1e-9.
class prob_vector {
public:
    explicit prob_vector(std::vector<double> values);

    size_t size() const noexcept { return v_.size(); }
    double operator[](size_t i) const { return v_[i]; }
    const std::vector<double>& values() const noexcept { return v_; }

private:
    std::vector<double> v_;
};

// Per-step mixing weights for the parametric, contextual, and abstention
// distributions. Simplex-valued for the calibrated strategies; the printed
// ACD-A formulas can push components outside [0, 1] while keeping the sum 1.
struct step_weights {
    double w_p = 0.0;
    double w_c = 0.0;
    double w_a = 0.0;

    double sum() const noexcept { return w_p + w_c + w_a; }
    bool operator==(const step_weights&) const = default;
};

inline constexpr double weight_sum_tolerance = 1e-9;

// Numerically stable softmax (max subtraction) of logits / temperature.
prob_vector softmax(const logit_vector& logits, double temperature = 1.0);

// Shannon entropy in nats, with the 0 * ln 0 = 0 convention.
double entropy(const prob_vector& p);

// Index of the largest component; ties resolve to the lowest index.
size_t argmax(const logit_vector& d);

// d_o = w_p * d_p + w_c * d_c + w_a * d_a (componentwise, in logit space).
logit_vector mix_three(const step_weights& w, const logit_vector& d_p,
                       const logit_vector& d_c, const logit_vector& d_a);

// Two-distribution ensemble: d_p + w_c * (d_c - d_p).
logit_vector ccd_mix(const logit_vector& d_p, const logit_vector& d_c, double w_c);

// Context amplification: d_c + w * (d_c - d_p).
logit_vector cad_mix(const logit_vector& d_p, const logit_vector& d_c, double w);

// w_c = 1 - h_c / (h_p + h_c); both entropies zero degenerates to 0.5.
double acd_weight(double h_p, double h_c);

// Abstention-aware variant over three entropies. As printed the components
// may leave [0, 1]; the sum is always exactly 1. All-zero entropies
// degenerate to the symmetric (1/3, 1/3, 1/3).
step_weights acda_weights(double h_p, double h_c, double h_a);

enum class entropy_variant { first_token, average, max, min };

double aggregate_entropy(entropy_variant variant, std::span<const double> step_entropies);

}  // namespace abstain

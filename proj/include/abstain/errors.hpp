#pragma once

#include <stdexcept>
#include <string>

namespace abstain {

// Error taxonomy shared across the library. The CLI maps these onto process
// exit codes: usage/data errors -> 1, backend transport errors -> 2.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed values (NaN/inf logits, invalid probability vectors, bad records).
struct invalid_input_error : error {
    using error::error;
};

// A parameter outside its contract (temperature <= 0, weights off the simplex).
struct invalid_argument_error : error {
    using error::error;
};

// Vector length mismatch between distributions combined in one mix.
struct shape_error : error {
    using error::error;
};

// Prompt exceeds the backend's declared context window.
struct capacity_error : error {
    using error::error;
};

// Text not expressible in the mock vocabulary; message names the offending span.
struct tokenization_error : error {
    using error::error;
};

// File-level problems: missing inputs, id mismatches, empty datasets.
struct data_error : error {
    using error::error;
};

// Remote backend failure, with retry metadata attached.
struct transport_error : error {
    transport_error(const std::string& msg, int attempts_, bool retryable_)
        : error(msg), attempts(attempts_), retryable(retryable_) {}
    int attempts = 0;
    bool retryable = false;
};

}  // namespace abstain

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "abstain/dist.hpp"
#include "abstain/prompt.hpp"

namespace abstain {

using token_id = int32_t;
using token_sequence = std::vector<token_id>;

// Explicit token table with a greedy longest-match tokenizer. Whitespace has
// no special role: a space is a token like any other.
class vocabulary {
public:
    vocabulary() = default;
    vocabulary(std::vector<std::string> tokens, token_id eos);

    size_t size() const noexcept { return tokens_.size(); }
    token_id eos_id() const noexcept { return eos_id_; }
    const std::string& token(token_id id) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    token_sequence tokenize(std::string_view text) const;
    std::string detokenize(std::span<const token_id> tokens) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, token_id> index_;
    std::vector<size_t> probe_lengths_;  // distinct token lengths, descending
    token_id eos_id_ = 0;
};

struct backend_caps {
    bool concurrent_safe = true;
    int max_context_tokens = 4096;
};

// Token-level language model: next-token logits over a fixed vocabulary.
class lm_backend {
public:
    virtual ~lm_backend() = default;

    virtual size_t vocab_size() const = 0;
    virtual token_id eos_id() const = 0;
    virtual backend_caps caps() const = 0;

    virtual logit_vector logits(std::span<const token_id> prefix) const = 0;

    virtual token_sequence tokenize(std::string_view text) const = 0;
    virtual std::string detokenize(std::span<const token_id> tokens) const = 0;
};

// One table entry: fires when every `contains` string occurs in the
// detokenized prefix and the prefix ends with `ends_with` (empty matches
// anything). Template-kind keying is expressed by including the kind's
// marker string (template_set::kind_marker) among `contains`.
struct table_rule {
    std::vector<std::string> contains;
    std::string ends_with;
    logit_vector out;
};

// Deterministic mock backend driving all tests: an ordered rule list, first
// match wins, with a default vector when nothing matches. Immutable after
// construction and therefore concurrent-safe.
class table_lm final : public lm_backend {
public:
    table_lm(vocabulary vocab, std::vector<table_rule> rules, logit_vector default_logits,
             int max_context_tokens = 4096);

    size_t vocab_size() const override { return vocab_.size(); }
    token_id eos_id() const override { return vocab_.eos_id(); }
    backend_caps caps() const override { return {true, max_context_tokens_}; }

    logit_vector logits(std::span<const token_id> prefix) const override;

    token_sequence tokenize(std::string_view text) const override { return vocab_.tokenize(text); }
    std::string detokenize(std::span<const token_id> tokens) const override {
        return vocab_.detokenize(tokens);
    }

    const vocabulary& vocab() const noexcept { return vocab_; }

    // mock:<file> schema (line-independent JSON document)
    static table_lm from_file(const std::string& path);
    static table_lm from_json_text(std::string_view text);

private:
    vocabulary vocab_;
    std::vector<table_rule> rules_;
    logit_vector default_;
    int max_context_tokens_;
};

// Serializes access to a backend that is not concurrent-safe.
class locking_backend final : public lm_backend {
public:
    explicit locking_backend(const lm_backend& inner) : inner_(inner) {}

    size_t vocab_size() const override { return inner_.vocab_size(); }
    token_id eos_id() const override { return inner_.eos_id(); }
    backend_caps caps() const override { return inner_.caps(); }

    logit_vector logits(std::span<const token_id> prefix) const override {
        std::lock_guard<std::mutex> lock(mu_);
        return inner_.logits(prefix);
    }
    token_sequence tokenize(std::string_view text) const override {
        std::lock_guard<std::mutex> lock(mu_);
        return inner_.tokenize(text);
    }
    std::string detokenize(std::span<const token_id> tokens) const override {
        std::lock_guard<std::mutex> lock(mu_);
        return inner_.detokenize(tokens);
    }

private:
    const lm_backend& inner_;
    mutable std::mutex mu_;
};

// One seeded autoregressive sample: multinomial draws from
// softmax(logits / temperature), stopping at eos or max_tokens. A
// temperature of exactly 0 selects the argmax at each step.
std::string sample_sequence(const lm_backend& backend, const rendered_prompt& prompt,
                            double temperature, int max_tokens, uint64_t seed);

}  // namespace abstain

#include "abstain/backend.hpp"

#include <algorithm>
#include <functional>

#include <json.hpp>

#include "abstain/errors.hpp"
#include "abstain/util.hpp"

namespace abstain {

vocabulary::vocabulary(std::vector<std::string> tokens, token_id eos)
    : tokens_(std::move(tokens)), eos_id_(eos) {
    if (tokens_.empty()) throw invalid_argument_error("vocabulary must be non-empty");
    if (eos_id_ < 0 || static_cast<size_t>(eos_id_) >= tokens_.size()) {
        throw invalid_argument_error("eos_id outside the vocabulary");
    }
    for (size_t i = 0; i < tokens_.size(); ++i) {
        const auto& t = tokens_[i];
        if (t.empty()) throw invalid_argument_error("empty token string");
        if (!index_.emplace(t, static_cast<token_id>(i)).second) {
            throw invalid_argument_error("duplicate token string: " + t);
        }
        probe_lengths_.push_back(t.size());
    }
    std::sort(probe_lengths_.begin(), probe_lengths_.end(), std::greater<>());
    probe_lengths_.erase(std::unique(probe_lengths_.begin(), probe_lengths_.end()),
                         probe_lengths_.end());
}

const std::string& vocabulary::token(token_id id) const {
    if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) {
        throw invalid_argument_error("token id outside the vocabulary");
    }
    return tokens_[static_cast<size_t>(id)];
}

token_sequence vocabulary::tokenize(std::string_view text) const {
    token_sequence out;
    std::string probe;
    size_t pos = 0;
    while (pos < text.size()) {
        const size_t remaining = text.size() - pos;
        bool matched = false;
        for (size_t len : probe_lengths_) {
            if (len > remaining) continue;
            probe.assign(text.substr(pos, len));
            auto it = index_.find(probe);
            if (it != index_.end()) {
                out.push_back(it->second);
                pos += len;
                matched = true;
                break;
            }
        }
        if (!matched) {
            size_t span_end = std::min(text.size(), pos + 24);
            throw tokenization_error("no vocabulary token matches text at byte " +
                                     std::to_string(pos) + ": \"" +
                                     std::string(text.substr(pos, span_end - pos)) + "\"");
        }
    }
    return out;
}

std::string vocabulary::detokenize(std::span<const token_id> tokens) const {
    std::string out;
    for (token_id id : tokens) out += token(id);
    return out;
}

table_lm::table_lm(vocabulary vocab, std::vector<table_rule> rules, logit_vector default_logits,
                   int max_context_tokens)
    : vocab_(std::move(vocab)),
      rules_(std::move(rules)),
      default_(std::move(default_logits)),
      max_context_tokens_(max_context_tokens) {
    if (default_.size() != vocab_.size()) {
        throw shape_error("default logits do not match vocabulary size");
    }
    for (const auto& r : rules_) {
        if (r.out.size() != vocab_.size()) {
            throw shape_error("rule logits do not match vocabulary size");
        }
    }
    if (max_context_tokens_ <= 0) throw invalid_argument_error("max_context_tokens must be > 0");
}

logit_vector table_lm::logits(std::span<const token_id> prefix) const {
    if (prefix.size() > static_cast<size_t>(max_context_tokens_)) {
        throw capacity_error("prefix of " + std::to_string(prefix.size()) +
                             " tokens exceeds the context window of " +
                             std::to_string(max_context_tokens_));
    }
    const std::string text = vocab_.detokenize(prefix);
    for (const auto& rule : rules_) {
        bool ok = true;
        for (const auto& needle : rule.contains) {
            if (!contains(text, needle)) {
                ok = false;
                break;
            }
        }
        if (ok && !rule.ends_with.empty() && !text.ends_with(rule.ends_with)) ok = false;
        if (ok) return rule.out;
    }
    return default_;
}

table_lm table_lm::from_file(const std::string& path) {
    return from_json_text(read_text_file(path));
}

table_lm table_lm::from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("mock backend file is not valid JSON: ") + e.what());
    }
    try {
        auto tokens = doc.at("tokens").get<std::vector<std::string>>();
        auto eos = doc.at("eos_id").get<token_id>();
        vocabulary vocab(std::move(tokens), eos);

        std::vector<table_rule> rules;
        if (doc.contains("rules")) {
            for (const auto& r : doc.at("rules")) {
                table_rule rule;
                if (r.contains("contains")) {
                    rule.contains = r.at("contains").get<std::vector<std::string>>();
                }
                rule.ends_with = r.value("ends_with", std::string());
                rule.out = logit_vector(r.at("logits").get<std::vector<double>>());
                rules.push_back(std::move(rule));
            }
        }
        logit_vector dflt(doc.at("default_logits").get<std::vector<double>>());
        int max_ctx = doc.value("max_context_tokens", 4096);
        return table_lm(std::move(vocab), std::move(rules), std::move(dflt), max_ctx);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("mock backend file has a bad field: ") + e.what());
    }
}

std::string sample_sequence(const lm_backend& backend, const rendered_prompt& prompt,
                            double temperature, int max_tokens, uint64_t seed) {
    if (max_tokens < 1) throw invalid_argument_error("max_tokens must be >= 1");
    if (temperature < 0.0) throw invalid_argument_error("temperature must be >= 0");

    token_sequence prefix = backend.tokenize(prompt.text);
    rng64 rng(seed);
    token_sequence generated;
    for (int step = 0; step < max_tokens; ++step) {
        const logit_vector d = backend.logits(prefix);
        token_id next;
        if (temperature == 0.0) {
            next = static_cast<token_id>(argmax(d));
        } else {
            const prob_vector p = softmax(d, temperature);
            const double u = rng.uniform01();
            double cum = 0.0;
            size_t pick = p.size() - 1;
            for (size_t i = 0; i < p.size(); ++i) {
                cum += p[i];
                if (u < cum) {
                    pick = i;
                    break;
                }
            }
            next = static_cast<token_id>(pick);
        }
        if (next == backend.eos_id()) break;
        generated.push_back(next);
        prefix.push_back(next);
    }
    return backend.detokenize(generated);
}

}  // namespace abstain

#include "abstain/remote.hpp"

#include <httplib.h>

#include "abstain/errors.hpp"

namespace abstain {

remote_transport http_transport(std::string base_url) {
    return [base_url = std::move(base_url)](const std::string& op, const std::string& body) {
        httplib::Client client(base_url);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(30, 0);
        httplib::Result res = op == "handshake"
                                  ? client.Get("/handshake")
                                  : client.Post("/" + op, body, "application/json");
        if (!res) {
            throw transport_error("cannot reach " + base_url + "/" + op + ": " +
                                      httplib::to_string(res.error()),
                                  1, true);
        }
        if (res->status != 200) {
            throw transport_error(base_url + "/" + op + " returned HTTP " +
                                      std::to_string(res->status),
                                  1, res->status >= 500);
        }
        return res->body;
    };
}

remote_lm::remote_lm(remote_transport transport, std::optional<vocabulary> local_vocab,
                     int max_attempts)
    : transport_(std::move(transport)),
      vocab_(std::move(local_vocab)),
      max_attempts_(max_attempts) {
    if (!transport_) throw invalid_argument_error("remote backend needs a transport");
    if (max_attempts_ < 1) throw invalid_argument_error("max_attempts must be >= 1");
    handshake_ = wire::parse_handshake_response(transport_("handshake", ""));
    if (handshake_.vocab_size <= 0 || handshake_.max_context_tokens <= 0 ||
        handshake_.eos_id < 0 || handshake_.eos_id >= handshake_.vocab_size) {
        throw transport_error("handshake reported an invalid model shape", 1, false);
    }
    if (vocab_ && vocab_->size() != static_cast<size_t>(handshake_.vocab_size)) {
        throw invalid_argument_error("local vocabulary size disagrees with the handshake");
    }
}

logit_vector remote_lm::logits(std::span<const token_id> prefix) const {
    if (prefix.size() > static_cast<size_t>(handshake_.max_context_tokens)) {
        throw capacity_error("prefix exceeds the remote context window");
    }
    wire::logits_request req;
    req.request_id = "r" + std::to_string(next_request_.fetch_add(1));
    req.prefix_token_ids.assign(prefix.begin(), prefix.end());

    int attempt = 0;
    for (;;) {
        ++attempt;
        try {
            const auto resp = wire::parse_logits_response(transport_("logits", wire::serialize(req)));
            if (resp.request_id != req.request_id) {
                throw transport_error("response id " + resp.request_id +
                                          " does not match request " + req.request_id,
                                      attempt, false);
            }
            if (resp.logits.size() != static_cast<size_t>(handshake_.vocab_size)) {
                throw transport_error("response logits length " +
                                          std::to_string(resp.logits.size()) +
                                          " does not match vocab size",
                                      attempt, false);
            }
            std::vector<double> values(resp.logits.begin(), resp.logits.end());
            return logit_vector(std::move(values));
        } catch (const transport_error& e) {
            if (!e.retryable || attempt >= max_attempts_) {
                throw transport_error(e.what(), attempt, e.retryable);
            }
        }
    }
}

token_sequence remote_lm::tokenize(std::string_view text) const {
    if (!vocab_) {
        throw invalid_argument_error(
            "remote backend has no local vocabulary; pass one to map text to token ids");
    }
    return vocab_->tokenize(text);
}

std::string remote_lm::detokenize(std::span<const token_id> tokens) const {
    if (!vocab_) {
        throw invalid_argument_error(
            "remote backend has no local vocabulary; pass one to map token ids to text");
    }
    return vocab_->detokenize(tokens);
}

}  // namespace abstain

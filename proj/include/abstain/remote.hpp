#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "abstain/backend.hpp"
#include "abstain/wire.hpp"

namespace abstain {

// Sends a serialized request to an op endpoint ("handshake" or "logits")
// and returns the serialized response. Throws transport_error on failure.
using remote_transport = std::function<std::string(const std::string& op, const std::string& body)>;

// HTTP binding of the wire contract: GET <base>/handshake, POST <base>/logits.
remote_transport http_transport(std::string base_url);

// Backend over the remote wire contract. Token-level only: the protocol
// carries ids, not token strings, so text mapping requires a locally
// supplied vocabulary (tokenize/detokenize throw without one).
class remote_lm final : public lm_backend {
public:
    remote_lm(remote_transport transport, std::optional<vocabulary> local_vocab = std::nullopt,
              int max_attempts = 3);

    size_t vocab_size() const override { return static_cast<size_t>(handshake_.vocab_size); }
    token_id eos_id() const override { return handshake_.eos_id; }
    backend_caps caps() const override { return {false, handshake_.max_context_tokens}; }

    logit_vector logits(std::span<const token_id> prefix) const override;

    token_sequence tokenize(std::string_view text) const override;
    std::string detokenize(std::span<const token_id> tokens) const override;

private:
    remote_transport transport_;
    wire::handshake_response handshake_;
    std::optional<vocabulary> vocab_;
    int max_attempts_;
    mutable std::atomic<uint64_t> next_request_{0};
};

}  // namespace abstain

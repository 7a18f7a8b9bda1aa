#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abstain/backend.hpp"

namespace abstain::wire {

// Transport-agnostic messages exchanged with a remote logits server. The
// JSON field names below are the wire contract.

struct logits_request {
    std::string request_id;
    std::vector<token_id> prefix_token_ids;
    std::string want = "logits";
};

struct logits_response {
    std::string request_id;
    std::vector<float> logits;
};

struct handshake_response {
    int vocab_size = 0;
    token_id eos_id = 0;
    int max_context_tokens = 0;
};

std::string serialize(const logits_request& req);
std::string serialize(const logits_response& resp);
std::string serialize(const handshake_response& resp);

logits_request parse_logits_request(const std::string& text);
logits_response parse_logits_response(const std::string& text);
handshake_response parse_handshake_response(const std::string& text);

}  // namespace abstain::wire

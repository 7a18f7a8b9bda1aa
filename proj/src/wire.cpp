#include "abstain/wire.hpp"

#include <json.hpp>

#include "abstain/errors.hpp"

namespace abstain::wire {

namespace {

nlohmann::json parse_or_throw(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw transport_error(std::string("malformed ") + what + ": " + e.what(), 1, false);
    }
}

}  // namespace

std::string serialize(const logits_request& req) {
    nlohmann::ordered_json j;
    j["request_id"] = req.request_id;
    j["prefix_token_ids"] = req.prefix_token_ids;
    j["want"] = req.want;
    return j.dump();
}

std::string serialize(const logits_response& resp) {
    nlohmann::ordered_json j;
    j["request_id"] = resp.request_id;
    j["logits"] = resp.logits;
    return j.dump();
}

std::string serialize(const handshake_response& resp) {
    nlohmann::ordered_json j;
    j["vocab_size"] = resp.vocab_size;
    j["eos_id"] = resp.eos_id;
    j["max_context_tokens"] = resp.max_context_tokens;
    return j.dump();
}

logits_request parse_logits_request(const std::string& text) {
    const auto j = parse_or_throw(text, "logits request");
    try {
        logits_request req;
        req.request_id = j.at("request_id").get<std::string>();
        req.prefix_token_ids = j.at("prefix_token_ids").get<std::vector<token_id>>();
        req.want = j.at("want").get<std::string>();
        return req;
    } catch (const nlohmann::json::exception& e) {
        throw transport_error(std::string("bad logits request field: ") + e.what(), 1, false);
    }
}

logits_response parse_logits_response(const std::string& text) {
    const auto j = parse_or_throw(text, "logits response");
    try {
        logits_response resp;
        resp.request_id = j.at("request_id").get<std::string>();
        resp.logits = j.at("logits").get<std::vector<float>>();
        return resp;
    } catch (const nlohmann::json::exception& e) {
        throw transport_error(std::string("bad logits response field: ") + e.what(), 1, false);
    }
}

handshake_response parse_handshake_response(const std::string& text) {
    const auto j = parse_or_throw(text, "handshake response");
    try {
        handshake_response resp;
        resp.vocab_size = j.at("vocab_size").get<int>();
        resp.eos_id = j.at("eos_id").get<token_id>();
        resp.max_context_tokens = j.at("max_context_tokens").get<int>();
        return resp;
    } catch (const nlohmann::json::exception& e) {
        throw transport_error(std::string("bad handshake field: ") + e.what(), 1, false);
    }
}

}  // namespace abstain::wire

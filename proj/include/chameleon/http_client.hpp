#pragma once

// OpenAI-compatible chat-completions adapter. Define CPPHTTPLIB_OPENSSL_SUPPORT
// (and link OpenSSL::SSL) for https endpoints.

#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "chameleon/chat.hpp"

namespace chameleon {

struct Endpoint {
    std::string scheme_host_port;  // e.g. "https://api.example.com:443"
    std::string path;              // e.g. "/v1/chat/completions"
};

inline Endpoint parse_endpoint(const std::string& url) {
    const auto sep = url.find("://");
    if (sep == std::string::npos) throw TransportError("endpoint url needs a scheme: '" + url + "'");
    const auto slash = url.find('/', sep + 3);
    Endpoint e;
    e.scheme_host_port = url.substr(0, slash);
    e.path = slash == std::string::npos ? "/v1/chat/completions" : url.substr(slash);
    return e;
}

/// Request body in chat-completions form; images travel as base64 data URLs.
inline nlohmann::json chat_completions_body(const ChatRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) {
        nlohmann::json content = nlohmann::json::array();
        for (const auto& p : m.parts) {
            if (p.kind == ContentPart::Kind::Text)
                content.push_back({{"type", "text"}, {"text", p.text}});
            else
                content.push_back({{"type", "image_url"},
                                   {"image_url", {{"url", "data:image/png;base64," + httplib::detail::base64_encode(p.text)}}}});
        }
        messages.push_back({{"role", m.role}, {"content", content}});
    }
    return {{"model", req.model}, {"temperature", req.temperature}, {"max_tokens", req.max_tokens}, {"messages", messages}};
}

inline std::string reply_text(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        std::string out;
        for (const auto& part : content)
            if (part.value("type", std::string()) == "text") out += part.value("text", std::string());
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed completion response: ") + e.what());
    }
}

class HttpChatClient : public ChatClient {
public:
    HttpChatClient(std::string url, std::string api_key, int timeout_s = 60)
        : endpoint_(parse_endpoint(url)), key_(std::move(api_key)), timeout_s_(timeout_s) {}

    std::string complete(const ChatRequest& req) override {
        httplib::Client cli(endpoint_.scheme_host_port);
        cli.set_connection_timeout(timeout_s_, 0);
        cli.set_read_timeout(timeout_s_, 0);
        cli.set_write_timeout(timeout_s_, 0);
        httplib::Headers headers;
        if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
        auto res = cli.Post(endpoint_.path, headers, chat_completions_body(req).dump(), "application/json");
        if (!res) throw TransportError("http: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw TransportError("http status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        return reply_text(res->body);
    }

private:
    Endpoint endpoint_;
    std::string key_;
    int timeout_s_;
};

}  // namespace chameleon

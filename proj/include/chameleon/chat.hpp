#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "chameleon/error.hpp"

namespace chameleon {

inline std::array<std::uint8_t, 32> sha256(std::string_view bytes) {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
        throw Error("sha256 failed");
    return out;
}

inline std::string sha256_hex(std::string_view bytes) {
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    for (auto b : sha256(bytes)) {
        s.push_back(hex[b >> 4]);
        s.push_back(hex[b & 15]);
    }
    return s;
}

/// Uniform double in [0,1) from the first 8 digest bytes of `bytes`.
inline double hash_unit(std::string_view bytes) {
    const auto d = sha256(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    return static_cast<double>(v >> 11) * 0x1.0p-53;
}

struct ContentPart {
    enum class Kind { Text, Image };
    Kind kind = Kind::Text;
    std::string text;  // Text: UTF-8; Image: PNG bytes

    static ContentPart make_text(std::string t) { return {Kind::Text, std::move(t)}; }
    static ContentPart make_png(std::string png) { return {Kind::Image, std::move(png)}; }

    friend bool operator==(const ContentPart&, const ContentPart&) = default;
};

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::vector<ContentPart> parts;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::string model = "gpt-4o";
    double temperature = 0.0;
    int max_tokens = 512;
    /// Harness-side description of the request (task kind, subject ids). Never
    /// sent over the wire; lets offline clients answer without reading pixels.
    nlohmann::json annotations = nlohmann::json::object();
};

/// Stable byte serialisation of what a backend would see; images enter by digest.
inline std::string canonical_bytes(const ChatRequest& req) {
    std::string s = "model=" + req.model + "\nmax_tokens=" + std::to_string(req.max_tokens) + "\n";
    for (const auto& m : req.messages) {
        s += "[" + m.role + "]\n";
        for (const auto& p : m.parts) {
            if (p.kind == ContentPart::Kind::Text) {
                s += "text:" + std::to_string(p.text.size()) + ":" + p.text + "\n";
            } else {
                s += "png:" + sha256_hex(p.text) + "\n";
            }
        }
    }
    return s;
}

inline std::string request_digest(const ChatRequest& req) { return sha256_hex(canonical_bytes(req)); }

/// One request, one text reply. Implementations throw TransportError on failure
/// and must be safe to call from several threads.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

}  // namespace chameleon

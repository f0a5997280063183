#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chameleon/chat.hpp"
#include "chameleon/program_assets.hpp"
#include "chameleon/vqa.hpp"

namespace chameleon::harness {

struct MockPolicy {
    double epsilon = 0.0;
    std::uint64_t seed = 0;
};

struct MockTruth {
    Scene scene;
    GroundTruthTopology gt;
};

/// Ground-truth label of a VQA question about `truth`.
inline vqa::VqaLabel true_label(vqa::VqaKind kind, const MockTruth& truth, int green, std::optional<int> blue) {
    using vqa::VqaKind;
    using vqa::VqaLabel;
    const Scene& s = truth.scene;
    if (!s.has_lane(green)) throw Error("mock: unresolvable subject lane " + std::to_string(green));
    if (vqa::is_pair_kind(kind) && (!blue || !s.has_lane(*blue)))
        throw Error("mock: unresolvable object lane " + (blue ? std::to_string(*blue) : std::string("(none)")));
    const auto& g = s.lane(green);
    switch (kind) {
        case VqaKind::Adjacency:
            return truth.gt.lsls(s.lane_index(green), s.lane_index(*blue)) ? VqaLabel::Yes : VqaLabel::No;
        case VqaKind::IsInIntersection:
            return geometry::is_in_intersection(g, s) == geometry::Tristate::Yes ? VqaLabel::Yes : VqaLabel::No;
        case VqaKind::LeftOrRight:
            switch (geometry::lateral_order(g, s.lane(*blue))) {
                case geometry::LateralRelation::Left: return VqaLabel::Left;
                case geometry::LateralRelation::Right: return VqaLabel::Right;
                default: return VqaLabel::None;
            }
        case VqaKind::Vector:
            return geometry::angle_deg(geometry::overall_heading(g), geometry::overall_heading(s.lane(*blue))) < 45.0
                       ? VqaLabel::Yes
                       : VqaLabel::No;
    }
    return VqaLabel::No;
}

/// Flip decision and replacement label derive from the request bytes and the seed only.
inline vqa::VqaLabel apply_policy(vqa::VqaKind kind, vqa::VqaLabel truth, const std::string& canonical,
                                  const MockPolicy& policy) {
    using vqa::VqaLabel;
    const std::string key = canonical + "\nseed=" + std::to_string(policy.seed);
    if (!(hash_unit(key) < policy.epsilon)) return truth;
    if (kind != vqa::VqaKind::LeftOrRight) return truth == VqaLabel::Yes ? VqaLabel::No : VqaLabel::Yes;
    std::vector<VqaLabel> others;
    for (auto l : {VqaLabel::Left, VqaLabel::Right, VqaLabel::None})
        if (l != truth) others.push_back(l);
    return others[hash_unit(key + "\nalt") < 0.5 ? 0 : 1];
}

/// Reply to a VQA request (annotated by vqa::to_chat_request) in canonical answer phrasing.
inline std::string mock_answer(const ChatRequest& req, const MockTruth& truth, const MockPolicy& policy) {
    const auto& a = req.annotations;
    const auto kind = vqa::kind_from_string(a.value("kind", std::string()));
    if (!kind || !a.contains("green")) throw Error("mock: request carries no VQA subject");
    std::optional<int> blue;
    if (a.contains("blue")) blue = a.at("blue").get<int>();
    const auto label = apply_policy(*kind, true_label(*kind, truth, a.at("green").get<int>(), blue),
                                    canonical_bytes(req), policy);
    return vqa::canonical_reply(*kind, label);
}

/// Program text for a synthesis request.
using SynthesisScript = std::function<std::string(const ChatRequest&)>;

inline std::string default_program_reply(const ChatRequest& req) {
    return req.annotations.value("target", std::string("lsls")) == "lste" ? std::string(assets::kLsteDefault)
                                                                          : std::string(assets::kLslsDefault);
}

/// Ablation script: no expert rules gives the pairwise program, shots give the few-shot program.
inline std::string ablation_program_reply(const ChatRequest& req) {
    if (req.annotations.value("target", std::string("lsls")) == "lste") return std::string(assets::kLsteDefault);
    if (!req.annotations.value("rules", false)) return std::string(assets::kLslsPairwise);
    if (req.annotations.value("shots", 0) > 0) return std::string(assets::kLslsFewshot);
    return std::string(assets::kLslsDefault);
}

/// Offline stand-in for a VLM. Answers are a pure function of (request, truth, policy).
class MockClient : public ChatClient {
public:
    explicit MockClient(MockPolicy policy = {}, SynthesisScript script = default_program_reply)
        : policy_(policy), script_(std::move(script)) {}

    void add_frame(const Scene& scene, const GroundTruthTopology& gt) {
        std::lock_guard lock(mu_);
        frames_[scene.frame_id] = MockTruth{scene, gt};
    }

    std::string complete(const ChatRequest& req) override {
        ++calls_;
        const auto task = req.annotations.value("task", std::string());
        if (task == "synthesis") return script_(req);
        if (task != "vqa") throw Error("mock: unknown task '" + task + "'");
        const MockTruth* truth = nullptr;
        {
            std::lock_guard lock(mu_);
            auto it = frames_.find(req.annotations.value("frame", std::string()));
            if (it != frames_.end()) truth = &it->second;
        }
        if (!truth) throw Error("mock: no ground truth for frame '" + req.annotations.value("frame", std::string()) + "'");
        return mock_answer(req, *truth, policy_);
    }

    int calls() const { return calls_; }
    const MockPolicy& policy() const { return policy_; }

private:
    MockPolicy policy_;
    SynthesisScript script_;
    std::mutex mu_;
    std::map<std::string, MockTruth> frames_;
    std::atomic<int> calls_{0};
};

/// Fails a fraction of calls with TransportError. The n-th attempt of a given
/// request fails or not independently of other requests and of call order.
class FaultInjectingClient : public ChatClient {
public:
    FaultInjectingClient(ChatClient& inner, double failure_rate, std::uint64_t seed = 0)
        : inner_(inner), rate_(failure_rate), seed_(seed) {}

    std::string complete(const ChatRequest& req) override {
        const std::string digest = request_digest(req);
        int attempt;
        {
            std::lock_guard lock(mu_);
            attempt = ++attempts_[digest];
        }
        if (hash_unit(digest + "#" + std::to_string(attempt) + "#" + std::to_string(seed_)) < rate_) {
            ++injected_;
            throw TransportError("injected transport failure");
        }
        return inner_.complete(req);
    }

    int injected() const { return injected_; }

private:
    ChatClient& inner_;
    double rate_;
    std::uint64_t seed_;
    std::mutex mu_;
    std::map<std::string, int> attempts_;
    std::atomic<int> injected_{0};
};

struct TranscriptEntry {
    std::string digest;
    std::optional<std::string> reply;  // empty: the call failed with `error`
    std::string error;
};

inline nlohmann::json to_json(const TranscriptEntry& e) {
    nlohmann::json j = {{"digest", e.digest}};
    if (e.reply) j["reply"] = *e.reply;
    else j["error"] = e.error;
    return j;
}

inline TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
    TranscriptEntry e;
    e.digest = j.at("digest").get<std::string>();
    if (j.contains("reply")) e.reply = j.at("reply").get<std::string>();
    else e.error = j.value("error", std::string("recorded failure"));
    return e;
}

/// Passes calls through and keeps every exchange, failures included.
class RecordingClient : public ChatClient {
public:
    explicit RecordingClient(ChatClient& inner) : inner_(inner) {}

    std::string complete(const ChatRequest& req) override {
        TranscriptEntry e{request_digest(req), std::nullopt, {}};
        try {
            e.reply = inner_.complete(req);
        } catch (const TransportError& err) {
            e.error = err.what();
            std::lock_guard lock(mu_);
            entries_.push_back(e);
            throw;
        }
        std::lock_guard lock(mu_);
        entries_.push_back(e);
        return *e.reply;
    }

    std::vector<TranscriptEntry> entries() const {
        std::lock_guard lock(mu_);
        return entries_;
    }

    std::string to_jsonl() const {
        std::string s;
        for (const auto& e : entries()) s += to_json(e).dump() + "\n";
        return s;
    }

private:
    ChatClient& inner_;
    mutable std::mutex mu_;
    std::vector<TranscriptEntry> entries_;
};

inline std::vector<TranscriptEntry> parse_transcript(std::string_view jsonl) {
    std::vector<TranscriptEntry> entries;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        auto end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) end = jsonl.size();
        const auto line = jsonl.substr(pos, end - pos);
        if (!line.empty()) entries.push_back(transcript_entry_from_json(nlohmann::json::parse(line)));
        pos = end + 1;
    }
    return entries;
}

/// Serves recorded replies by request digest, in recorded order per digest.
class ReplayClient : public ChatClient {
public:
    explicit ReplayClient(const std::vector<TranscriptEntry>& entries) {
        for (const auto& e : entries) queue_[e.digest].push_back(e);
    }

    std::string complete(const ChatRequest& req) override {
        std::lock_guard lock(mu_);
        auto it = queue_.find(request_digest(req));
        if (it == queue_.end() || it->second.empty()) throw Error("replay: request not in transcript");
        const TranscriptEntry e = it->second.front();
        it->second.pop_front();
        if (!e.reply) throw TransportError(e.error);
        return *e.reply;
    }

private:
    std::mutex mu_;
    std::map<std::string, std::deque<TranscriptEntry>> queue_;
};

}  // namespace chameleon::harness

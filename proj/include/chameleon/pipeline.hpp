#pragma once

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chameleon/fast_system.hpp"
#include "chameleon/scene_io.hpp"
#include "chameleon/slow_system.hpp"
#include "chameleon/synth.hpp"

namespace chameleon::pipeline {

using dsl::Verdict;
using nlohmann::json;

struct ClientConfig {
    std::string kind = "mock";  // mock | http
    std::string url;
    std::string api_key;
    std::string model = "gpt-4o";
    int timeout_s = 60;
    double mock_epsilon = 0.0;
    std::uint64_t mock_seed = 0;
};

struct PipelineConfig {
    geometry::GeometryConfig geometry;
    render::RenderConfig render;
    fast::FastConfig fast;
    fast::Mode mode = fast::Mode::fewshot;
    int shots = 3;
    int budget = 6;
    double unresolved_score = 0.5;
    std::vector<vqa::VqaKind> lsls_vqa_kinds{vqa::VqaKind::Adjacency};
    std::vector<std::string> cot_steps{slow::kCotSteps.begin(), slow::kCotSteps.end()};
    int max_in_flight = 1;
    bool resynthesize_per_frame = false;
    bool record_timing = false;
    std::vector<std::string> fewshot_scenes;  // scene files with ground truth; empty: built-in frames
    ClientConfig client;

    bool hard_filters() const { return mode != fast::Mode::pairwise && fast.hard_filters; }
    int effective_shots() const { return mode == fast::Mode::fewshot ? shots : 0; }
};

namespace detail {

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(path + "." + key, "wrong type");
    }
}

}  // namespace detail

inline PipelineConfig pipeline_config_from_json(const json& j) {
    using detail::read;
    PipelineConfig c;
    if (!j.is_object()) throw SchemaError("", "config must be an object");
    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        auto& t = c.geometry;
        read(g, "parallel_max_heading_deg", t.parallel_max_heading_deg, ".geometry");
        read(g, "parallel_min_offset_m", t.parallel_min_offset_m, ".geometry");
        read(g, "parallel_max_offset_m", t.parallel_max_offset_m, ".geometry");
        read(g, "parallel_min_overlap", t.parallel_min_overlap, ".geometry");
        read(g, "ego_max_heading_deg", t.ego_max_heading_deg, ".geometry");
        read(g, "ego_max_lateral_m", t.ego_max_lateral_m, ".geometry");
        read(g, "lateral_min_offset_m", t.lateral_min_offset_m, ".geometry");
        read(g, "intersection_min_fraction", t.intersection_min_fraction, ".geometry");
        read(g, "turn_min_deg", t.turn_min_deg, ".geometry");
    }
    if (j.contains("fast")) {
        const auto& f = j.at("fast");
        read(f, "max_endpoint_distance_m", c.fast.max_endpoint_distance_m, ".fast");
        read(f, "max_heading_deviation_deg", c.fast.max_heading_deviation_deg, ".fast");
        read(f, "hard_filters", c.fast.hard_filters, ".fast");
    }
    if (j.contains("mode")) {
        const auto m = fast::mode_from_string(j.at("mode").get<std::string>());
        if (!m) throw SchemaError(".mode", "expected pairwise, +rules or +fewshot");
        c.mode = *m;
    }
    read(j, "shots", c.shots, "");
    read(j, "budget", c.budget, "");
    read(j, "unresolved_score", c.unresolved_score, "");
    if (j.contains("lsls_vqa_kinds")) {
        c.lsls_vqa_kinds.clear();
        for (const auto& k : j.at("lsls_vqa_kinds")) {
            const auto kind = vqa::kind_from_string(k.get<std::string>());
            if (!kind || *kind == vqa::VqaKind::IsInIntersection)
                throw SchemaError(".lsls_vqa_kinds", "unsupported kind '" + k.get<std::string>() + "'");
            c.lsls_vqa_kinds.push_back(*kind);
        }
    }
    read(j, "cot_steps", c.cot_steps, "");
    read(j, "max_in_flight", c.max_in_flight, "");
    read(j, "resynthesize_per_frame", c.resynthesize_per_frame, "");
    read(j, "record_timing", c.record_timing, "");
    read(j, "fewshot_scenes", c.fewshot_scenes, "");
    if (j.contains("client")) {
        const auto& k = j.at("client");
        read(k, "kind", c.client.kind, ".client");
        read(k, "url", c.client.url, ".client");
        read(k, "api_key", c.client.api_key, ".client");
        read(k, "model", c.client.model, ".client");
        read(k, "timeout_s", c.client.timeout_s, ".client");
        read(k, "mock_epsilon", c.client.mock_epsilon, ".client");
        read(k, "mock_seed", c.client.mock_seed, ".client");
    }
    if (c.budget < 0) throw SchemaError(".budget", "must be >= 0");
    if (c.shots < 0) throw SchemaError(".shots", "must be >= 0");
    if (!(c.unresolved_score >= 0 && c.unresolved_score <= 1)) throw SchemaError(".unresolved_score", "must be in [0,1]");
    if (!(c.client.mock_epsilon >= 0 && c.client.mock_epsilon <= 1))
        throw SchemaError(".client.mock_epsilon", "must be in [0,1]");
    if (c.client.kind != "mock" && c.client.kind != "http") throw SchemaError(".client.kind", "expected mock or http");
    slow::CotConfig cot;
    cot.steps = c.cot_steps;
    if (auto v = slow::validate_cot_config(cot); !v.empty()) throw SchemaError(".cot_steps", v.front());
    return c;
}

/// Environment overrides for the HTTP endpoint.
inline void apply_env(PipelineConfig& c) {
    if (const char* u = std::getenv("CHAMELEON_VLM_URL"); u && *u) c.client.url = u;
    if (const char* k = std::getenv("CHAMELEON_VLM_KEY"); k && *k) c.client.api_key = k;
}

inline json pipeline_config_to_json(const PipelineConfig& c) {
    std::vector<std::string> kinds;
    for (auto k : c.lsls_vqa_kinds) kinds.emplace_back(vqa::to_string(k));
    const auto& g = c.geometry;
    return {{"geometry",
             {{"parallel_max_heading_deg", g.parallel_max_heading_deg},
              {"parallel_min_offset_m", g.parallel_min_offset_m},
              {"parallel_max_offset_m", g.parallel_max_offset_m},
              {"parallel_min_overlap", g.parallel_min_overlap},
              {"ego_max_heading_deg", g.ego_max_heading_deg},
              {"ego_max_lateral_m", g.ego_max_lateral_m},
              {"lateral_min_offset_m", g.lateral_min_offset_m},
              {"intersection_min_fraction", g.intersection_min_fraction},
              {"turn_min_deg", g.turn_min_deg}}},
            {"fast",
             {{"max_endpoint_distance_m", c.fast.max_endpoint_distance_m},
              {"max_heading_deviation_deg", c.fast.max_heading_deviation_deg},
              {"hard_filters", c.fast.hard_filters}}},
            {"mode", fast::to_string(c.mode)},
            {"shots", c.shots},
            {"budget", c.budget},
            {"unresolved_score", c.unresolved_score},
            {"lsls_vqa_kinds", kinds},
            {"cot_steps", c.cot_steps},
            {"max_in_flight", c.max_in_flight},
            {"resynthesize_per_frame", c.resynthesize_per_frame},
            {"record_timing", c.record_timing},
            {"fewshot_scenes", c.fewshot_scenes},
            {"client",
             {{"kind", c.client.kind},
              {"url", c.client.url},
              {"model", c.client.model},
              {"timeout_s", c.client.timeout_s},
              {"mock_epsilon", c.client.mock_epsilon},
              {"mock_seed", c.client.mock_seed}}}};
}

/// Reference frames shown to the synthesizer when no scene files are configured.
inline std::vector<fast::FewShotFrame> builtin_fewshot_frames(int count) {
    std::vector<fast::FewShotFrame> out;
    for (int i = 0; i < count; ++i) {
        auto cfg = synth::suite_config(static_cast<std::uint64_t>(2 * i + 1));
        auto [scene, gt] = synth::synth_scene(cfg, 9001 + static_cast<std::uint64_t>(i));
        scene.frame_id = "reference_" + std::to_string(i + 1);
        out.push_back({std::move(scene), std::move(gt)});
    }
    return out;
}

inline std::vector<fast::FewShotFrame> load_fewshot_frames(const PipelineConfig& cfg) {
    const int shots = cfg.effective_shots();
    if (cfg.fewshot_scenes.empty()) return builtin_fewshot_frames(shots);
    std::vector<fast::FewShotFrame> out;
    for (int i = 0; i < shots && i < static_cast<int>(cfg.fewshot_scenes.size()); ++i) {
        auto doc = parse_scene_document(read_file(cfg.fewshot_scenes[static_cast<std::size_t>(i)]));
        if (!doc.ground_truth) throw SchemaError(".ground_truth", "few-shot scene needs ground truth");
        out.push_back({std::move(doc.scene), std::move(*doc.ground_truth)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

struct PairRecord {
    Target target = Target::lsls;
    int subject = 0;
    int object = 0;
    std::string path;
    double score = 0.0;
    double wall_ms = 0.0;
    std::vector<std::string> flags;
    std::string note;
};

struct ProgramInfo {
    bool fallback = false;
    int retries = 0;
    std::string text;
};

struct Trace {
    std::string frame_id;
    std::size_t lanes = 0;
    std::size_t traffic_elements = 0;
    int budget = 0;
    int vlm_calls = 0;
    int fast_pairs = 0;
    int slow_pairs = 0;
    int unresolved = 0;
    int transport_failures = 0;
    int parse_failures = 0;
    double fast_ms = 0.0;
    std::optional<int> ego_lane;
    std::vector<std::string> cot_steps;
    std::optional<ProgramInfo> lsls_program;
    std::optional<ProgramInfo> lste_program;
    std::vector<PairRecord> pairs;
    std::vector<slow::VqaRecord> vqa;
};

inline json vqa_record_json(const slow::VqaRecord& r, const std::string& frame_id) {
    json j = {{"frame_id", frame_id},
              {"kind", vqa::to_string(r.kind)},
              {"green", r.green},
              {"blue", r.blue ? json(*r.blue) : json(nullptr)},
              {"description", r.description},
              {"question", r.question},
              {"image_sha256", r.image_sha256},
              {"reply", r.reply},
              {"label", r.label ? json(vqa::to_string(*r.label)) : json(nullptr)},
              {"parse_failed", r.parse_failed}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

inline slow::VqaRecord vqa_record_from_json(const json& j) {
    slow::VqaRecord r;
    r.kind = vqa::kind_from_string(j.at("kind").get<std::string>()).value_or(vqa::VqaKind::Adjacency);
    r.green = j.at("green").get<int>();
    if (!j.at("blue").is_null()) r.blue = j.at("blue").get<int>();
    r.description = j.value("description", std::string());
    r.question = j.value("question", std::string());
    r.image_sha256 = j.value("image_sha256", std::string());
    r.reply = j.value("reply", std::string());
    if (j.contains("label") && !j.at("label").is_null()) r.label = vqa::label_from_string(j.at("label").get<std::string>());
    r.parse_failed = j.value("parse_failed", false);
    r.error = j.value("error", std::string());
    return r;
}

inline json trace_to_json(const Trace& t) {
    auto program = [](const std::optional<ProgramInfo>& p) -> json {
        if (!p) return nullptr;
        return {{"fallback", p->fallback}, {"retries", p->retries}, {"text", p->text}};
    };
    json pairs = json::array();
    for (const auto& p : t.pairs) {
        json r = {{"target", to_string(p.target)}, {"subject", p.subject}, {"object", p.object},
                  {"path", p.path},                {"score", p.score},     {"wall_ms", p.wall_ms}};
        if (!p.flags.empty()) r["flags"] = p.flags;
        if (!p.note.empty()) r["note"] = p.note;
        pairs.push_back(std::move(r));
    }
    json vq = json::array();
    for (const auto& r : t.vqa) vq.push_back(vqa_record_json(r, t.frame_id));
    return {{"lanes", t.lanes},
            {"traffic_elements", t.traffic_elements},
            {"budget", t.budget},
            {"vlm_calls", t.vlm_calls},
            {"fast_pairs", t.fast_pairs},
            {"slow_pairs", t.slow_pairs},
            {"unresolved", t.unresolved},
            {"transport_failures", t.transport_failures},
            {"parse_failures", t.parse_failures},
            {"fast_ms", t.fast_ms},
            {"ego_lane", t.ego_lane ? json(*t.ego_lane) : json(nullptr)},
            {"cot_steps", t.cot_steps},
            {"programs", {{"lsls", program(t.lsls_program)}, {"lste", program(t.lste_program)}}},
            {"pairs", pairs},
            {"vqa", vq}};
}

inline Trace trace_from_json(const json& j, const std::string& frame_id) {
    Trace t;
    t.frame_id = frame_id;
    t.lanes = j.value("lanes", std::size_t{0});
    t.traffic_elements = j.value("traffic_elements", std::size_t{0});
    t.budget = j.value("budget", 0);
    t.vlm_calls = j.value("vlm_calls", 0);
    t.fast_pairs = j.value("fast_pairs", 0);
    t.slow_pairs = j.value("slow_pairs", 0);
    t.unresolved = j.value("unresolved", 0);
    t.transport_failures = j.value("transport_failures", 0);
    t.parse_failures = j.value("parse_failures", 0);
    t.fast_ms = j.value("fast_ms", 0.0);
    if (j.contains("ego_lane") && !j.at("ego_lane").is_null()) t.ego_lane = j.at("ego_lane").get<int>();
    t.cot_steps = j.value("cot_steps", std::vector<std::string>{});
    if (j.contains("programs")) {
        auto program = [](const json& p) -> std::optional<ProgramInfo> {
            if (p.is_null()) return std::nullopt;
            return ProgramInfo{p.value("fallback", false), p.value("retries", 0), p.value("text", std::string())};
        };
        const auto& ps = j.at("programs");
        if (ps.contains("lsls")) t.lsls_program = program(ps.at("lsls"));
        if (ps.contains("lste")) t.lste_program = program(ps.at("lste"));
    }
    for (const auto& p : j.value("pairs", json::array())) {
        PairRecord r;
        r.target = p.at("target").get<std::string>() == "lste" ? Target::lste : Target::lsls;
        r.subject = p.at("subject").get<int>();
        r.object = p.at("object").get<int>();
        r.path = p.at("path").get<std::string>();
        r.score = p.at("score").get<double>();
        r.wall_ms = p.value("wall_ms", 0.0);
        r.flags = p.value("flags", std::vector<std::string>{});
        r.note = p.value("note", std::string());
        t.pairs.push_back(std::move(r));
    }
    for (const auto& r : j.value("vqa", json::array())) t.vqa.push_back(vqa_record_from_json(r));
    return t;
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct FrameResult {
    TopologyMatrices matrices;
    Trace trace;
};

/// Holds the synthesized programs of a run; one synthesis per target per run
/// (per frame when `resynthesize_per_frame`), started only when a target has pairs.
class Extractor {
public:
    Extractor(PipelineConfig cfg, ChatClient& client, std::optional<std::vector<fast::FewShotFrame>> fewshot = {})
        : cfg_(std::move(cfg)), client_(client), fewshot_(std::move(fewshot)) {}

    const PipelineConfig& config() const { return cfg_; }
    int synthesis_exchanges() const { return synthesis_exchanges_; }
    const std::optional<fast::SynthesisResult>& program(Target t) const { return t == Target::lsls ? lsls_ : lste_; }

    const fast::SynthesisResult& ensure_program(Target t) {
        auto& slot = t == Target::lsls ? lsls_ : lste_;
        if (slot) return *slot;
        if (!fewshot_) fewshot_ = load_fewshot_frames(cfg_);
        std::optional<std::string> rules;
        if (cfg_.mode != fast::Mode::pairwise) rules = fast::expert_rules_text(t, cfg_.fast);
        const auto bundle =
            fast::build_synthesis_prompt(registry_prompt_text(), *fewshot_, rules, t, cfg_.render);
        slot = fast::synthesize_program(client_, bundle, t, cfg_.client.model);
        synthesis_exchanges_ += 1 + slot->retries;
        return *slot;
    }

    FrameResult run(const Scene& scene) {
        if (auto v = validate_scene(scene); !v.empty()) throw SchemaError("", v.front());
        if (cfg_.resynthesize_per_frame) {
            lsls_.reset();
            lste_.reset();
        }
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        const std::size_t m = scene.lanes.size();
        const std::size_t n = scene.traffic_elements.size();
        const SceneContext ctx(scene, cfg_.geometry);
        fast::FastConfig fcfg = cfg_.fast;
        fcfg.hard_filters = cfg_.hard_filters();

        FrameResult out;
        Trace& tr = out.trace;
        tr.frame_id = scene.frame_id;
        tr.lanes = m;
        tr.traffic_elements = n;
        tr.budget = cfg_.budget;
        tr.ego_lane = ctx.ego_lane();

        auto run_fast = [&](Target t, std::size_t cols) {
            const std::size_t pairs = t == Target::lsls ? m * (m - (m ? 1 : 0)) : m * cols;
            if (pairs == 0) {
                // nothing to decide: the diagonal (lsls) is NEG by construction
                fast::VerdictMatrix vm{t, Matrix<fast::PairDecision>(m, cols)};
                for (std::size_t i = 0; i < m && t == Target::lsls; ++i)
                    vm.entries(i, i) = {Verdict::NEG, fast::Source::hard_filter, std::nullopt, 0, "diagonal"};
                return vm;
            }
            const auto& prog = ensure_program(t);
            (t == Target::lsls ? tr.lsls_program : tr.lste_program) =
                ProgramInfo{prog.fallback, prog.retries, dsl::format_program(prog.program)};
            return fast::fast_pass(ctx, prog.program, fcfg, prog.fallback);
        };
        const auto f0 = clock::now();
        const auto lsls = run_fast(Target::lsls, m);
        const auto lste = run_fast(Target::lste, n);
        if (cfg_.record_timing) tr.fast_ms = std::chrono::duration<double, std::milli>(clock::now() - f0).count();

        slow::CallLedger ledger;
        ledger.budget = cfg_.budget;
        slow::CotConfig cot;
        cot.steps = cfg_.cot_steps;
        cot.model = cfg_.client.model;
        cot.render = cfg_.render;
        const auto cot_res = slow::run_cot_lste(ctx, lste, lsls, client_, ledger, cot);
        const auto vqa_res = slow::resolve_lsls(ctx, lsls, cfg_.lsls_vqa_kinds, client_, ledger, cfg_.client.model,
                                                cfg_.max_in_flight, cfg_.render);
        tr.cot_steps = cot_res.steps_run;
        tr.vlm_calls = ledger.calls;
        tr.transport_failures = ledger.transport_failures;
        tr.parse_failures = ledger.parse_failures;

        std::set<std::pair<int, int>> parse_failed_pairs;
        for (const auto& r : ledger.records)
            if (r.parse_failed && r.blue) parse_failed_pairs.emplace(r.green, *r.blue);

        const double pair_ms =
            cfg_.record_timing
                ? std::chrono::duration<double, std::milli>(clock::now() - t0).count() / std::max<std::size_t>(1, m * (m + n))
                : 0.0;
        auto score_of = [&](Verdict v) { return v == Verdict::POS ? 1.0 : v == Verdict::NEG ? 0.0 : cfg_.unresolved_score; };
        auto record = [&](Target t, std::size_t i, std::size_t j, const fast::PairDecision& fd, auto slow_decision) {
            PairRecord r;
            r.target = t;
            r.subject = scene.lanes[i].id;
            r.object = t == Target::lsls ? scene.lanes[j].id : scene.traffic_elements[j].id;
            r.wall_ms = pair_ms;
            Verdict v = fd.verdict;
            if (v != Verdict::AMB) {
                r.path = fast::to_string(fd.source);
                ++tr.fast_pairs;
            } else if (slow_decision) {
                v = slow_decision->first;
                r.path = slow_decision->second;
                if (v != Verdict::AMB) ++tr.slow_pairs;
            } else {
                r.path = fast::to_string(fd.source);
            }
            if (!fd.note.empty()) r.note = fd.note;
            if (v == Verdict::AMB) {
                ++tr.unresolved;
                r.flags.push_back("unresolved");
            }
            if (t == Target::lsls && parse_failed_pairs.count({r.subject, r.object})) r.flags.push_back("parse_failure");
            r.score = score_of(v);
            tr.pairs.push_back(std::move(r));
            return score_of(v);
        };

        out.matrices.lsls = Matrix<double>(m, m);
        out.matrices.lste = Matrix<double>(m, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                std::optional<std::pair<Verdict, std::string>> sd;
                if (auto it = vqa_res.find({i, j}); it != vqa_res.end()) sd.emplace(it->second.verdict, it->second.path);
                out.matrices.lsls(i, j) = record(Target::lsls, i, j, lsls.entries(i, j), sd);
            }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                std::optional<std::pair<Verdict, std::string>> sd;
                if (auto it = cot_res.decisions.find({i, j}); it != cot_res.decisions.end())
                    sd.emplace(it->second.verdict, "cot_step:" + it->second.step);
                out.matrices.lste(i, j) = record(Target::lste, i, j, lste.entries(i, j), sd);
            }
        tr.vqa = std::move(ledger.records);
        return out;
    }

private:
    PipelineConfig cfg_;
    ChatClient& client_;
    std::optional<std::vector<fast::FewShotFrame>> fewshot_;
    std::optional<fast::SynthesisResult> lsls_;
    std::optional<fast::SynthesisResult> lste_;
    int synthesis_exchanges_ = 0;
};

/// Single-frame convenience: a fresh run (synthesis included) for one scene.
inline FrameResult extract_topology(const Scene& scene, const PipelineConfig& cfg, ChatClient& client) {
    Extractor ex(cfg, client);
    return ex.run(scene);
}

// ---------------------------------------------------------------------------
// Output document
// ---------------------------------------------------------------------------

inline json matrix_json(const Matrix<double>& m) {
    json out = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

/// `{frame_id, lsls, lste, trace}` plus the lane geometry and TE ids the scores refer to.
inline json output_document(const Scene& scene, const FrameResult& r) {
    json lanes = json::array();
    for (const auto& l : scene.lanes) {
        json pts = json::array();
        for (const auto& p : l.centerline) pts.push_back({p.x, p.y, p.z});
        lanes.push_back({{"id", l.id}, {"centerline", pts}});
    }
    json te_ids = json::array();
    for (const auto& t : scene.traffic_elements) te_ids.push_back(t.id);
    return {{"frame_id", scene.frame_id}, {"lsls", matrix_json(r.matrices.lsls)}, {"lste", matrix_json(r.matrices.lste)},
            {"lanes", lanes},             {"te_ids", te_ids},                       {"trace", trace_to_json(r.trace)}};
}

struct OutputDocument {
    std::string frame_id;
    std::vector<LaneSegment> lanes;
    std::vector<int> te_ids;
    TopologyMatrices matrices;
    Trace trace;
};

inline OutputDocument parse_output_document(const json& j) {
    OutputDocument d;
    d.frame_id = j.at("frame_id").get<std::string>();
    for (const auto& l : j.at("lanes")) {
        LaneSegment lane;
        lane.id = l.at("id").get<int>();
        for (const auto& p : l.at("centerline")) lane.centerline.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
        d.lanes.push_back(std::move(lane));
    }
    d.te_ids = j.at("te_ids").get<std::vector<int>>();
    auto mat = [](const json& a, std::size_t rows, std::size_t cols, const char* name) {
        if (a.size() != rows) throw SchemaError(std::string(".") + name, "dimension mismatch");
        Matrix<double> m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            if (a[r].size() != cols) throw SchemaError(std::string(".") + name, "dimension mismatch");
            for (std::size_t c = 0; c < cols; ++c) m(r, c) = a[r][c].get<double>();
        }
        return m;
    };
    d.matrices.lsls = mat(j.at("lsls"), d.lanes.size(), d.lanes.size(), "lsls");
    d.matrices.lste = mat(j.at("lste"), d.lanes.size(), d.te_ids.size(), "lste");
    if (j.contains("trace")) d.trace = trace_from_json(j.at("trace"), d.frame_id);
    return d;
}

}  // namespace chameleon::pipeline

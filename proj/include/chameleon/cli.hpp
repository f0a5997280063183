#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "chameleon/chameleon.hpp"
#include "chameleon/http_client.hpp"

namespace chameleon::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::vector<fs::path> json_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string dump(const json& j) { return j.dump(1) + "\n"; }

// ---- synth ----

struct SynthOptions {
    std::string config_path;  // empty: defaults
    std::uint64_t seed = 0;
    int count = 1;
    std::string out_dir;
};

/// `scenes/<frame>.json`: detections as the pipeline sees them (noise applied) with
/// ground truth restricted to surviving lanes. `gt/<frame>.json`: clean scene, full truth.
inline std::vector<std::string> run_synth(const SynthOptions& o) {
    json cj = json::object();
    if (!o.config_path.empty()) cj = json::parse(read_file(o.config_path));
    const bool suite = cj.value("suite", false);
    synth::SynthConfig base = synth::synth_config_from_json(cj);
    fs::create_directories(fs::path(o.out_dir) / "scenes");
    fs::create_directories(fs::path(o.out_dir) / "gt");
    std::vector<std::string> frames;
    for (int k = 0; k < o.count; ++k) {
        const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(k);
        const synth::SynthConfig cfg = suite ? synth::suite_config(seed, base.noise) : base;
        auto [noisy, noisy_gt] = synth::synth_scene(cfg, seed);
        auto [clean, clean_gt] = synth::synth_scene(synth::without_noise(cfg), seed);
        write_file((fs::path(o.out_dir) / "scenes" / (noisy.frame_id + ".json")).string(), serialize_scene(noisy, noisy_gt));
        write_file((fs::path(o.out_dir) / "gt" / (clean.frame_id + ".json")).string(), serialize_scene(clean, clean_gt));
        frames.push_back(noisy.frame_id);
    }
    return frames;
}

// ---- extract ----

struct ExtractOptions {
    std::string scenes_dir;
    std::string config_path;
    std::optional<std::string> client;  // mock | http
    std::optional<int> budget;
    std::optional<int> shots;
    std::optional<std::string> mode;
    std::optional<double> epsilon;
    std::optional<std::uint64_t> mock_seed;
    std::optional<double> fault_rate;
    std::string record_path;
    std::string replay_path;
    bool ablation_script = false;  // scripted synthesis replies (mock only)
    bool timing = false;
    std::string out_dir;
};

struct ExtractSummary {
    std::size_t frames = 0;
    int vlm_calls = 0;
    int synthesis_exchanges = 0;
    int unresolved = 0;
};

inline pipeline::PipelineConfig load_pipeline_config(const ExtractOptions& o) {
    pipeline::PipelineConfig cfg;
    if (!o.config_path.empty()) cfg = pipeline::pipeline_config_from_json(json::parse(read_file(o.config_path)));
    pipeline::apply_env(cfg);
    if (o.client) cfg.client.kind = *o.client;
    if (o.budget) cfg.budget = *o.budget;
    if (o.shots) cfg.shots = *o.shots;
    if (o.mode) {
        auto m = fast::mode_from_string(*o.mode);
        if (!m) throw Error("unknown mode '" + *o.mode + "'");
        cfg.mode = *m;
    }
    if (o.epsilon) cfg.client.mock_epsilon = *o.epsilon;
    if (o.mock_seed) cfg.client.mock_seed = *o.mock_seed;
    if (o.timing) cfg.record_timing = true;
    if (cfg.budget < 0) throw Error("budget must be >= 0");
    return cfg;
}

inline fs::path scenes_path(const std::string& dir) {
    const fs::path sub = fs::path(dir) / "scenes";
    return fs::is_directory(sub) ? sub : fs::path(dir);
}

inline ExtractSummary run_extract(const ExtractOptions& o) {
    const auto cfg = load_pipeline_config(o);
    std::vector<SceneDocument> docs;
    for (const auto& f : json_files(scenes_path(o.scenes_dir))) docs.push_back(parse_scene_document(read_file(f.string())));

    std::unique_ptr<ChatClient> base;
    harness::MockClient* mock = nullptr;
    if (!o.replay_path.empty()) {
        base = std::make_unique<harness::ReplayClient>(harness::parse_transcript(read_file(o.replay_path)));
    } else if (cfg.client.kind == "http") {
        if (cfg.client.url.empty()) throw Error("http client needs a url (config client.url or CHAMELEON_VLM_URL)");
        base = std::make_unique<HttpChatClient>(cfg.client.url, cfg.client.api_key, cfg.client.timeout_s);
    } else {
        auto m = std::make_unique<harness::MockClient>(
            harness::MockPolicy{cfg.client.mock_epsilon, cfg.client.mock_seed},
            o.ablation_script ? harness::SynthesisScript(harness::ablation_program_reply)
                              : harness::SynthesisScript(harness::default_program_reply));
        mock = m.get();
        base = std::move(m);
    }
    if (mock)
        for (const auto& d : docs)
            if (d.ground_truth) mock->add_frame(d.scene, *d.ground_truth);
    ChatClient* client = base.get();
    std::unique_ptr<harness::FaultInjectingClient> faults;
    if (o.fault_rate && *o.fault_rate > 0) {
        faults = std::make_unique<harness::FaultInjectingClient>(*client, *o.fault_rate, cfg.client.mock_seed);
        client = faults.get();
    }
    std::unique_ptr<harness::RecordingClient> recorder;
    if (!o.record_path.empty()) {
        recorder = std::make_unique<harness::RecordingClient>(*client);
        client = recorder.get();
    }

    fs::create_directories(o.out_dir);
    pipeline::Extractor ex(cfg, *client);
    ExtractSummary sum;
    std::string transcript;
    for (const auto& d : docs) {
        const auto res = ex.run(d.scene);
        write_file((fs::path(o.out_dir) / (d.scene.frame_id + ".json")).string(),
                   dump(pipeline::output_document(d.scene, res)));
        for (const auto& r : res.trace.vqa) transcript += pipeline::vqa_record_json(r, d.scene.frame_id).dump() + "\n";
        ++sum.frames;
        sum.vlm_calls += res.trace.vlm_calls;
        sum.unresolved += res.trace.unresolved;
    }
    sum.synthesis_exchanges = ex.synthesis_exchanges();
    write_file((fs::path(o.out_dir) / "vqa_transcript.jsonl").string(), transcript);
    json programs = json::object();
    for (auto t : {Target::lsls, Target::lste})
        if (const auto& p = ex.program(t))
            programs[std::string(to_string(t))] = {{"text", dsl::format_program(p->program)},
                                                   {"fallback", p->fallback},
                                                   {"retries", p->retries},
                                                   {"errors", p->errors}};
    json run = {{"config", pipeline::pipeline_config_to_json(cfg)},
                {"programs", programs},
                {"synthesis_exchanges", sum.synthesis_exchanges},
                {"frames", sum.frames}};
    write_file((fs::path(o.out_dir) / "run.json").string(), dump(run));
    if (recorder) write_file(o.record_path, recorder->to_jsonl());
    return sum;
}

// ---- eval / report ----

inline std::vector<pipeline::OutputDocument> load_predictions(const std::string& dir) {
    std::vector<pipeline::OutputDocument> out;
    for (const auto& f : json_files(dir)) {
        if (f.filename() == "run.json") continue;
        out.push_back(pipeline::parse_output_document(json::parse(read_file(f.string()))));
    }
    return out;
}

inline std::map<std::string, eval::GtFrame> load_ground_truth(const std::string& dir) {
    const fs::path sub = fs::path(dir) / "gt";
    std::map<std::string, eval::GtFrame> out;
    for (const auto& f : json_files(fs::is_directory(sub) ? sub : fs::path(dir))) {
        auto doc = parse_scene_document(read_file(f.string()));
        if (!doc.ground_truth) throw SchemaError(".ground_truth", "missing in " + f.string());
        const std::string id = doc.scene.frame_id;
        out[id] = {std::move(doc.scene), std::move(*doc.ground_truth)};
    }
    return out;
}

struct EvalOptions {
    std::string pred_dir;
    std::string gt_dir;
    std::string out_path;
    double tau = eval::kDefaultTau;
    double per_call_ms = eval::kDefaultPerCallMs;
};

inline eval::Report run_eval(const EvalOptions& o) {
    const auto rep = eval::evaluate(load_predictions(o.pred_dir), load_ground_truth(o.gt_dir), o.tau, o.per_call_ms);
    if (!o.out_path.empty()) write_file(o.out_path, dump(eval::report_json(rep)));
    return rep;
}

inline json trace_report(const std::string& dir, double per_call_ms = eval::kDefaultPerCallMs) {
    const auto preds = load_predictions(dir);
    std::vector<pipeline::Trace> traces;
    std::map<std::string, int> paths;
    int calls = 0, max_calls = 0, unresolved = 0, failures = 0;
    std::size_t pairs = 0;
    json frames = json::array();
    for (const auto& d : preds) {
        traces.push_back(d.trace);
        calls += d.trace.vlm_calls;
        max_calls = std::max(max_calls, d.trace.vlm_calls);
        unresolved += d.trace.unresolved;
        failures += d.trace.transport_failures;
        pairs += d.trace.pairs.size();
        for (const auto& p : d.trace.pairs) ++paths[p.path];
    }
    const auto lat = eval::latency_report(traces, per_call_ms);
    for (const auto& f : lat.frames)
        frames.push_back({{"frame_id", f.frame_id},
                          {"vlm_calls", f.vlm_calls},
                          {"slow_ms", f.slow_ms},
                          {"fast_ms", f.fast_ms},
                          {"total_ms", f.total_ms},
                          {"counterfactual_dense_ms", f.dense_ms}});
    return {{"frames", preds.size()},
            {"pairs", pairs},
            {"vlm_calls", calls},
            {"max_vlm_calls_per_frame", max_calls},
            {"transport_failures", failures},
            {"unresolved", unresolved},
            {"paths", paths},
            {"latency",
             {{"per_call_ms", per_call_ms},
              {"mean_ms", lat.mean_ms},
              {"counterfactual_dense_ms", lat.mean_counterfactual_dense_ms},
              {"frames", frames}}}};
}

// ---- vqa-bench ----

struct BenchOptions {
    vqa::VqaKind kind = vqa::VqaKind::Adjacency;
    int n = 1000;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
};

struct BenchResult {
    std::size_t items = 0;
    std::size_t positives = 0;
    double accuracy = 0.0;
    std::size_t parse_failures = 0;
};

/// Balanced items (ceil(n/2) positive, floor(n/2) negative truths) drawn from
/// generated scenes, answered by the mock.
inline BenchResult run_vqa_bench(const BenchOptions& o) {
    using vqa::VqaKind;
    using vqa::VqaLabel;
    harness::MockClient mock({o.epsilon, o.seed});
    std::vector<VqaLabel> preds, truths;
    BenchResult r;
    std::uint64_t scene_seed = o.seed * 1000003ULL;
    const std::size_t want_pos = static_cast<std::size_t>(std::max(0, o.n) + 1) / 2;
    const std::size_t want_neg = static_cast<std::size_t>(std::max(0, o.n)) / 2;
    std::size_t negatives = 0;
    for (int scenes = 0; static_cast<int>(preds.size()) < o.n; ++scenes) {
        if (scenes > 100000) throw Error("vqa-bench: scenes do not supply balanced items");
        synth::SynthConfig cfg = synth::suite_config(scene_seed);
        cfg.te_spec.clear();
        auto [scene, gt] = synth::synth_scene(cfg, scene_seed);
        scene.frame_id = "bench_" + std::to_string(scene_seed);
        ++scene_seed;
        mock.add_frame(scene, gt);
        const harness::MockTruth truth{scene, gt};
        const std::size_t m = scene.lanes.size();
        // one positive and one negative candidate per scene
        std::optional<std::pair<int, std::optional<int>>> pos, neg;
        for (std::size_t i = 0; i < m && (!pos || !neg); ++i) {
            if (o.kind == VqaKind::IsInIntersection) {
                const auto l = harness::true_label(o.kind, truth, scene.lanes[i].id, std::nullopt);
                auto& slot = l == VqaLabel::Yes ? pos : neg;
                if (!slot) slot.emplace(scene.lanes[i].id, std::nullopt);
                continue;
            }
            for (std::size_t j = 0; j < m && (!pos || !neg); ++j) {
                if (i == j) continue;
                const auto l = harness::true_label(o.kind, truth, scene.lanes[i].id, scene.lanes[j].id);
                const bool positive = o.kind == VqaKind::LeftOrRight ? l != VqaLabel::None : l == VqaLabel::Yes;
                auto& slot = positive ? pos : neg;
                if (!slot) slot.emplace(scene.lanes[i].id, scene.lanes[j].id);
            }
        }
        for (const auto& item : {pos, neg}) {
            if (!item) continue;
            if (item == pos ? r.positives >= want_pos : negatives >= want_neg) continue;
            const auto q = vqa::build_vqa_query(o.kind, scene, item->first, item->second);
            const auto parsed = vqa::parse_vqa_answer(o.kind, mock.complete(vqa::to_chat_request(q)));
            preds.push_back(parsed.label);
            truths.push_back(harness::true_label(o.kind, truth, item->first, item->second));
            r.parse_failures += parsed.parse_failed;
            r.positives += item == pos;
            negatives += item == neg;
        }
    }
    r.items = preds.size();
    r.accuracy = r.items ? eval::vqa_accuracy(preds, truths) : 0.0;
    return r;
}

// ---- render ----

struct RenderOptions {
    std::string scene_path;
    std::optional<int> green;
    std::optional<int> blue;
    std::string view = "bev";  // bev | pv | mosaic
    bool arrows = false;
    std::string out_path;
};

inline void run_render(const RenderOptions& o) {
    const Scene scene = parse_scene(read_file(o.scene_path));
    render::HighlightSpec spec;
    spec.green_lane_id = o.green;
    spec.blue_lane_id = o.blue;
    spec.draw_arrows = o.arrows;
    Image img;
    if (o.view == "bev") img = render::render_bev(scene, spec);
    else if (o.view == "pv") img = render::render_pv(scene, spec);
    else if (o.view == "mosaic") img = mosaic(render::render_bev(scene, spec), render::render_pv(scene, spec));
    else throw Error("unknown view '" + o.view + "'");
    write_file(o.out_path, encode_png(img));
}

}  // namespace chameleon::cli

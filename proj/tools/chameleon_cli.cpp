#include <iostream>

#include <CLI11.hpp>

#include "chameleon/cli.hpp"

namespace cli = chameleon::cli;

int main(int argc, char** argv) {
    CLI::App app{"Lane topology extraction with a fast rule system and a VQA slow system"};
    app.require_subcommand(1);

    cli::SynthOptions so;
    auto* synth = app.add_subcommand("synth", "Generate synthetic scenes with ground truth");
    synth->add_option("--config", so.config_path, "Generator config (JSON)");
    synth->add_option("--seed", so.seed, "First seed")->required();
    synth->add_option("--count", so.count, "Number of consecutive seeds")->check(CLI::PositiveNumber);
    synth->add_option("--out", so.out_dir, "Output directory")->required();

    cli::ExtractOptions eo;
    std::string client, mode;
    int budget = 0, shots = 0;
    double epsilon = 0, fault_rate = 0;
    std::uint64_t mock_seed = 0;
    auto* extract = app.add_subcommand("extract", "Run the pipeline over a directory of scenes");
    extract->add_option("--scenes", eo.scenes_dir, "Scene directory (or a synth output directory)")->required();
    extract->add_option("--config", eo.config_path, "Pipeline config (JSON)");
    auto* o_client = extract->add_option("--client", client, "mock | http")->check(CLI::IsMember({"mock", "http"}));
    auto* o_budget = extract->add_option("--budget", budget, "VLM calls per frame")->check(CLI::NonNegativeNumber);
    auto* o_shots = extract->add_option("--shots", shots, "Few-shot frames")->check(CLI::NonNegativeNumber);
    auto* o_mode = extract->add_option("--mode", mode, "pairwise | +rules | +fewshot")
                       ->check(CLI::IsMember({"pairwise", "+rules", "+fewshot"}));
    auto* o_eps = extract->add_option("--epsilon", epsilon, "Mock error rate")->check(CLI::Range(0.0, 1.0));
    auto* o_seed = extract->add_option("--mock-seed", mock_seed, "Mock seed");
    auto* o_fault = extract->add_option("--fault-rate", fault_rate, "Injected transport failure rate")
                        ->check(CLI::Range(0.0, 1.0));
    extract->add_option("--record", eo.record_path, "Write the client transcript (JSONL)");
    extract->add_option("--replay", eo.replay_path, "Answer from a recorded transcript");
    extract->add_flag("--ablation-script", eo.ablation_script, "Mock synthesis replies depend on the prompt mode");
    extract->add_flag("--timing", eo.timing, "Record wall-clock times in traces");
    extract->add_option("--out", eo.out_dir, "Output directory")->required();

    cli::EvalOptions vo;
    auto* ev = app.add_subcommand("eval", "Score predictions against ground truth");
    ev->add_option("--pred", vo.pred_dir, "Prediction directory")->required();
    ev->add_option("--gt", vo.gt_dir, "Ground-truth directory (or a synth output directory)")->required();
    ev->add_option("--out", vo.out_path, "Report path (JSON)")->required();
    ev->add_option("--tau", vo.tau, "Matching threshold in meters")->check(CLI::PositiveNumber);
    ev->add_option("--per-call-ms", vo.per_call_ms, "Assumed latency per VLM call")->check(CLI::PositiveNumber);

    cli::BenchOptions bo;
    std::string kind = "adjacency";
    auto* bench = app.add_subcommand("vqa-bench", "Mock accuracy on generated VQA items");
    bench->add_option("--kind", kind, "left_or_right | is_in_intersection | adjacency | vector")
        ->check(CLI::IsMember({"left_or_right", "is_in_intersection", "adjacency", "vector"}));
    bench->add_option("--n", bo.n, "Number of items")->check(CLI::PositiveNumber);
    bench->add_option("--epsilon", bo.epsilon, "Mock error rate")->check(CLI::Range(0.0, 1.0));
    bench->add_option("--seed", bo.seed, "Seed");

    cli::RenderOptions ro;
    int green = 0, blue = 0;
    auto* rend = app.add_subcommand("render", "Render a scene to PNG");
    rend->add_option("--scene", ro.scene_path, "Scene file")->required();
    auto* o_green = rend->add_option("--green", green, "Lane highlighted in green");
    auto* o_blue = rend->add_option("--blue", blue, "Lane highlighted in blue");
    rend->add_option("--view", ro.view, "bev | pv | mosaic")->check(CLI::IsMember({"bev", "pv", "mosaic"}));
    rend->add_flag("--arrows", ro.arrows, "Draw direction arrows");
    rend->add_option("--out", ro.out_path, "Output PNG")->required();

    std::string traces_dir;
    double per_call_ms = chameleon::eval::kDefaultPerCallMs;
    auto* rep = app.add_subcommand("report", "Summarise traces");
    rep->add_option("--traces", traces_dir, "Directory of extract outputs")->required();
    rep->add_option("--per-call-ms", per_call_ms, "Assumed latency per VLM call")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const auto frames = cli::run_synth(so);
            std::cout << "wrote " << frames.size() << " scene(s) to " << so.out_dir << "\n";
        } else if (*extract) {
            if (*o_client) eo.client = client;
            if (*o_budget) eo.budget = budget;
            if (*o_shots) eo.shots = shots;
            if (*o_mode) eo.mode = mode;
            if (*o_eps) eo.epsilon = epsilon;
            if (*o_seed) eo.mock_seed = mock_seed;
            if (*o_fault) eo.fault_rate = fault_rate;
            const auto s = cli::run_extract(eo);
            std::cout << "frames " << s.frames << ", vlm calls " << s.vlm_calls << ", synthesis exchanges "
                      << s.synthesis_exchanges << ", unresolved pairs " << s.unresolved << "\n";
        } else if (*ev) {
            const auto r = cli::run_eval(vo);
            std::cout << cli::dump(chameleon::eval::report_json(r));
        } else if (*bench) {
            bo.kind = *chameleon::vqa::kind_from_string(kind);
            const auto r = cli::run_vqa_bench(bo);
            std::cout << cli::dump({{"kind", kind},
                                    {"items", r.items},
                                    {"positives", r.positives},
                                    {"epsilon", bo.epsilon},
                                    {"accuracy", r.accuracy},
                                    {"parse_failures", r.parse_failures}});
        } else if (*rend) {
            if (*o_green) ro.green = green;
            if (*o_blue) ro.blue = blue;
            cli::run_render(ro);
        } else if (*rep) {
            std::cout << cli::dump(cli::trace_report(traces_dir, per_call_ms));
        }
    } catch (const chameleon::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "concept_monitor/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/manifest.hpp"
#include "concept_monitor/parallel.hpp"
#include "concept_monitor/report.hpp"
#include "concept_monitor/sandbox.hpp"
#include "concept_monitor/simd/kernels.hpp"
#include "concept_monitor/telemetry.hpp"

namespace concept_monitor::cli {
namespace {

namespace fs = std::filesystem;

struct AnalysisFlags {
    std::string manifest;
    std::string layer;
    std::string detector = "cos3";
    std::optional<double> tau;
    std::optional<double> lambda;
    std::optional<double> gamma;
    std::optional<std::size_t> wpmi_top_k;
    std::optional<double> steepness;
    std::optional<double> quantile;
    double temperature = 0.01;
    std::string anchors;
    std::string out;
};

void add_analysis_flags(CLI::App* app, AnalysisFlags& f, bool needs_out = true) {
    app->add_option("--manifest", f.manifest, "Run manifest JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--layer", f.layer, "Layer name from the manifest")->required();
    app->add_option("--detector", f.detector, "Concept detector")
        ->check(CLI::IsMember({"cos3", "soft_wpmi", "iou"}))
        ->capture_default_str();
    app->add_option("--tau", f.tau, "Interpretability threshold (default: 0.1, or 0.04 for iou)");
    app->add_option("--lambda", f.lambda, "soft_wpmi: weight of the marginal term (default 1)");
    app->add_option("--gamma", f.gamma, "soft_wpmi: concept softmax temperature (default 0.05)");
    app->add_option("--wpmi-top-k", f.wpmi_top_k, "soft_wpmi: probes forming the neuron's top set");
    app->add_option("--steepness", f.steepness, "soft_wpmi: logistic steepness (default 10)");
    app->add_option("--quantile", f.quantile, "iou: activation quantile (default 0.05)");
    app->add_option("--temperature,-T", f.temperature, "Softmax temperature of the neuron embedding")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--anchors", f.anchors,
                    "Anchor TSV; embeddings are read from the sibling .cmtx (default: manifest anchors, else all concepts)");
    if (needs_out) app->add_option("--out", f.out, "Output directory")->required();
}

telemetry::AnalysisConfig analysis_config(const AnalysisFlags& f) {
    const auto kind = detect::parse_detector(f.detector);
    if (!kind) throw InputError("unknown detector: " + f.detector);
    telemetry::AnalysisConfig cfg;
    cfg.detector = detect::DetectorConfig::defaults(*kind);
    if (f.tau) cfg.detector.tau = *f.tau;
    if (f.lambda) cfg.detector.lambda = *f.lambda;
    if (f.gamma) cfg.detector.gamma = *f.gamma;
    if (f.wpmi_top_k) cfg.detector.top_k = *f.wpmi_top_k;
    if (f.steepness) cfg.detector.steepness = *f.steepness;
    if (f.quantile) cfg.detector.quantile = *f.quantile;
    cfg.detector.validate();
    cfg.embedding.temperature = f.temperature;
    cfg.embedding.validate();
    return cfg;
}

store::AnchorSet resolve_anchors(const AnalysisFlags& f, const store::Run& run) {
    if (!f.anchors.empty()) return store::load_anchor_set(f.anchors);
    if (run.anchors) return *run.anchors;
    return store::anchors_from_concepts(run.space);
}

fs::path out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

void write(const fs::path& path, const std::string& text, std::ostream& out) {
    store::write_file_atomic(path, text);
    out << "wrote " << path.string() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Concept telemetry for neural network training checkpoints", "concept-monitor"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::size_t> threads;
    app.add_option("--threads", threads, "Worker threads (overrides CONCEPT_MONITOR_THREADS)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));

    auto* info = app.add_subcommand("info", "Print the worker count and SIMD kernel in use");

    // validate
    std::string validate_manifest;
    auto* validate = app.add_subcommand("validate", "Check a run's files against its manifest");
    validate->add_option("--manifest", validate_manifest, "Run manifest JSON")->required();

    // snapshot
    AnalysisFlags snap;
    std::int64_t snap_epoch = 0;
    std::size_t snap_k = 5;
    std::vector<std::size_t> snap_highlight;
    auto* snapshot = app.add_subcommand("snapshot", "Report one checkpoint: concepts, categories, embedding, d_anchor");
    add_analysis_flags(snapshot, snap);
    snapshot->add_option("--epoch", snap_epoch, "Checkpoint epoch")->required();
    snapshot->add_option("--top-k,-K", snap_k, "Top activating probes per neuron")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    snapshot->add_option("--highlight", snap_highlight, "Neuron indices drawn in color");

    // track
    AnalysisFlags trk;
    std::vector<std::size_t> trk_neurons;
    double trk_delta = 0.1;
    auto* track = app.add_subcommand("track", "Follow neurons across all checkpoints of a layer");
    add_analysis_flags(track, trk);
    track->add_option("--neurons", trk_neurons, "Neuron indices")->required();
    track->add_option("--delta", trk_delta, "Settlement radius in embedding space")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    // compare
    std::string cmp_a, cmp_b, cmp_out;
    auto* compare = app.add_subcommand("compare", "Diff two snapshot.json reports (a - b)");
    compare->add_option("--a", cmp_a, "First snapshot.json")->required()->check(CLI::ExistingFile);
    compare->add_option("--b", cmp_b, "Second snapshot.json")->required()->check(CLI::ExistingFile);
    compare->add_option("--out", cmp_out, "Output directory")->required();

    // diversity
    AnalysisFlags dv;
    auto* div = app.add_subcommand("diversity", "d_anchor and pairwise diversity for every checkpoint of a layer");
    add_analysis_flags(div, dv);

    // sweep
    AnalysisFlags sw;
    std::int64_t sw_epoch = 0;
    std::vector<double> sw_temps{1e-3, 1e-2, 1e-1, 0.5};
    std::vector<double> sw_taus;
    auto* sweep = app.add_subcommand("sweep", "d_anchor over embedding temperatures, optionally interpretability over tau");
    add_analysis_flags(sweep, sw);
    sweep->add_option("--epoch", sw_epoch, "Checkpoint epoch")->required();
    sweep->add_option("--temperatures", sw_temps, "Temperatures to sweep")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sweep->add_option("--taus", sw_taus, "Thresholds to sweep (writes threshold_sweep.csv)");

    // sandbox
    sandbox::SandboxSpec sb_spec;
    diversity::RegularizerConfig sb_reg;
    std::string sb_out;
    auto* sb = app.add_subcommand("sandbox", "Train a small synthetic model with the diversity regularizer");
    sb->add_option("--beta", sb_reg.beta, "Regularizer weight")->check(CLI::NonNegativeNumber)->capture_default_str();
    sb->add_option("--temperature,-T", sb_reg.temperature, "Embedding temperature inside the regularizer")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sb->add_option("--steps", sb_spec.steps, "Gradient steps")->capture_default_str();
    sb->add_option("--step-size", sb_spec.step_size, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    sb->add_option("--seed", sb_spec.seed, "Problem seed")->capture_default_str();
    sb->add_option("--neurons", sb_spec.neurons, "Neurons")->check(CLI::PositiveNumber)->capture_default_str();
    sb->add_option("--out", sb_out, "Output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitInput;
    }

    try {
        if (threads) set_thread_count(*threads);

        if (info->parsed()) {
            out << "threads: " << thread_count() << "\n";
            out << "isa: " << simd::isa_name(simd::active_isa()) << "\n";
            return kExitOk;
        }

        if (validate->parsed()) {
            const auto report = store::validate_run(validate_manifest);
            for (const auto& c : report.checks)
                out << (c.passed ? "PASS " : "FAIL ") << c.name << (c.message.empty() ? "" : ": " + c.message) << "\n";
            out << (report.passed() ? "manifest OK" : "manifest has failures") << "\n";
            return report.passed() ? kExitOk : kExitInput;
        }

        if (snapshot->parsed()) {
            const auto cfg_base = analysis_config(snap);
            const auto run = store::open_run(snap.manifest);
            const auto anchors = resolve_anchors(snap, run);
            auto cfg = cfg_base;
            cfg.top_k = snap_k;
            const auto s = telemetry::build_snapshot(run, snap.layer, snap_epoch, cfg, anchors);
            for (std::size_t n : snap_highlight)
                if (n >= s.neurons.size()) throw InputError("invalid neuron index " + std::to_string(n));
            const fs::path dir = out_dir(snap.out);
            report::emit_snapshot_json(s, dir / "snapshot.json");
            out << "wrote " << (dir / "snapshot.json").string() << "\n";
            write(dir / "categories.csv", report::categories_csv(s.categories), out);
            write(dir / "embedding.svg", report::embedding_svg(s, snap_highlight), out);
            write(dir / "bars.svg",
                  report::category_bars_svg(s.categories, s.layer + " @ epoch " + std::to_string(s.epoch)), out);
            return kExitOk;
        }

        if (track->parsed()) {
            const auto cfg = analysis_config(trk);
            const auto run = store::open_run(trk.manifest);
            const auto anchors = resolve_anchors(trk, run);
            const auto t = telemetry::track_neurons(run, trk.layer, trk_neurons, cfg, anchors, trk_delta);
            const fs::path dir = out_dir(trk.out);
            write(dir / "trajectory.json", report::canonical_dump(report::trajectory_to_json(t)), out);
            write(dir / "trajectory.svg", report::trajectory_svg(t), out);
            return kExitOk;
        }

        if (compare->parsed()) {
            const auto a = report::read_snapshot_json(cmp_a);
            const auto b = report::read_snapshot_json(cmp_b);
            const auto c = telemetry::compare_runs(a, b);
            const fs::path dir = out_dir(cmp_out);
            write(dir / "comparison.json", report::canonical_dump(report::comparison_to_json(c)), out);
            return kExitOk;
        }

        if (div->parsed()) {
            const auto cfg = analysis_config(dv);
            const auto run = store::open_run(dv.manifest);
            const auto anchors = resolve_anchors(dv, run);
            const auto* layer = run.manifest.find_layer(dv.layer);
            if (!layer) throw InputError("layer not found: " + dv.layer);
            std::vector<report::EpochDiversity> rows;
            report::Series d{"d_anchor", {}, {}}, p{"pairwise diversity", {}, {}};
            for (const auto& ck : layer->checkpoints) {
                const auto s = telemetry::build_snapshot(run, dv.layer, ck.epoch, cfg, anchors);
                rows.push_back({ck.epoch, s.d_anchor, s.pairwise_diversity, s.categories.interpretable});
                d.x.push_back(static_cast<double>(ck.epoch));
                d.y.push_back(s.d_anchor);
                p.x.push_back(static_cast<double>(ck.epoch));
                p.y.push_back(s.pairwise_diversity);
            }
            const fs::path dir = out_dir(dv.out);
            write(dir / "diversity.csv", report::diversity_csv(rows), out);
            const report::Series series[] = {d, p};
            write(dir / "diversity.svg",
                  report::curve_svg(series, {dv.layer + " concept diversity", "epoch", "distance", false}), out);
            return kExitOk;
        }

        if (sweep->parsed()) {
            const auto cfg = analysis_config(sw);
            const auto run = store::open_run(sw.manifest);
            const auto anchors = resolve_anchors(sw, run);
            if (anchors.dim() != run.space.dim()) throw InputError("embedding dimension mismatch between concepts and anchors");
            const MatrixD q = run.load_activations(sw.layer, sw_epoch);
            const auto sims = detect::compute_similarity(q, run.space, cfg.detector);
            const auto points = diversity::temperature_sweep(sims.values, run.space.embeddings, anchors.embeddings, sw_temps);
            const fs::path dir = out_dir(sw.out);
            write(dir / "sweep.csv", report::sweep_csv(points), out);
            report::Series s{"d_anchor", {}, {}};
            for (const auto& pt : points) s.x.push_back(pt.temperature), s.y.push_back(pt.d_anchor);
            write(dir / "sweep.svg",
                  report::curve_svg(std::span(&s, 1), {"d_anchor vs temperature", "temperature", "d_anchor", true}), out);
            if (!sw_taus.empty()) {
                std::vector<report::ThresholdPoint> tp;
                for (double tau : sw_taus) {
                    auto dc = cfg.detector;
                    dc.tau = tau;
                    dc.validate();
                    const auto stats = telemetry::category_stats(detect::assign_concepts(sims, run.space, dc));
                    tp.push_back({tau, stats.interpretable, stats.interpretable_percentage});
                }
                write(dir / "threshold_sweep.csv", report::threshold_csv(tp), out);
            }
            return kExitOk;
        }

        if (sb->parsed()) {
            sb_reg.validate();
            const auto prob = sandbox::make_problem(sb_spec);
            const auto trace = sandbox::train(prob, sb_reg);
            const fs::path dir = out_dir(sb_out);
            write(dir / "sandbox_trace.csv", report::trace_csv(trace), out);
            report::Series loss{"task loss", {}, {}}, da{"d_anchor", {}, {}};
            for (const auto& r : trace) {
                loss.x.push_back(static_cast<double>(r.step));
                loss.y.push_back(r.task_loss);
                da.x.push_back(static_cast<double>(r.step));
                da.y.push_back(r.d_anchor);
            }
            const report::Series series[] = {loss, da};
            write(dir / "sandbox.svg", report::curve_svg(series, {"sandbox training", "step", "value", false}), out);
            return kExitOk;
        }
        err << "error: no subcommand\n";
        return kExitInput;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ComputeError& e) {
        err << "error: " << e.what() << "\n";
        return kExitCompute;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitCompute;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace concept_monitor::cli

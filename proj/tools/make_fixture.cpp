// Writes a seeded synthetic run (manifest, TSVs, MatrixFiles) for trying the CLI.
#include <CLI11.hpp>

#include <iostream>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/fixtures.hpp"

int main(int argc, char** argv) {
    using namespace concept_monitor;
    fixtures::RunSpec spec = fixtures::reference_spec();
    std::string dir;
    std::size_t neurons = 0;
    CLI::App app{"Write a synthetic concept-monitor run", "cm-make-fixture"};
    app.add_option("dir", dir, "Output directory")->required();
    app.add_option("--probes", spec.probes, "Probe count")->capture_default_str();
    app.add_option("--concepts", spec.concepts, "Concept count")->capture_default_str();
    app.add_option("--dim", spec.dim, "Embedding dimension")->capture_default_str();
    app.add_option("--neurons", neurons, "Neurons in a single layer4 (default: reference layers)");
    app.add_option("--epochs", spec.epochs, "Checkpoint epochs")->capture_default_str();
    app.add_option("--anchors", spec.anchors, "Anchor count, 0 for none")->capture_default_str();
    app.add_option("--seed", spec.seed, "Seed")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    if (neurons > 0) spec.layers = {{"layer4", neurons}};
    try {
        std::cout << fixtures::write_synthetic_run(spec, dir).string() << "\n";
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

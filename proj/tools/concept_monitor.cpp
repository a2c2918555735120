#include "concept_monitor/cli.hpp"

int main(int argc, char** argv) { return concept_monitor::cli::run_cli(argc, argv); }

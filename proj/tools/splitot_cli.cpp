#include "cli.hpp"

int main(int argc, char** argv) { return splitot::cli::run_cli(argc, argv); }

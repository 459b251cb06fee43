#include "bliss/cli.hpp"

int main(int argc, char** argv) { return bliss::cli::run_cli(argc, argv); }

#include "cli.hpp"

int main(int argc, char** argv) { return mvfactor::cli::run_cli(argc, argv); }

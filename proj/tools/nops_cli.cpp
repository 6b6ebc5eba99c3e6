#include "nops/cli.hpp"

int main(int argc, char** argv) { return nops::cli::run(argc, argv); }

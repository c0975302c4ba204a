#include "blv/cli.hpp"

int main(int argc, char** argv) { return blv::cli::run_main(argc, argv); }

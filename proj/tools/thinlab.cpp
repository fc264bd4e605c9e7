#include "thinlab/cli.hpp"

int main(int argc, char** argv) { return thinlab::cli::main(argc, argv); }

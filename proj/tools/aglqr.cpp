#include "aglqr/cli.hpp"

int main(int argc, char** argv) { return aglqr::cli::main(argc, argv); }

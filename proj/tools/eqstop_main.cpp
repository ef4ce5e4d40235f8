#include "eqstop/cli.hpp"

int main(int argc, char** argv) { return eqstop::cli::main(argc, argv); }

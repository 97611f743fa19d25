#include "mbnf/cli.hpp"

int main(int argc, char** argv) { return mbnf::cli::main(argc, argv); }

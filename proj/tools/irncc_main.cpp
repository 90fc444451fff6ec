#include "irncc/cli.hpp"

int main(int argc, char** argv) { return irncc::cli_main(argc, argv); }

#include "cohnet/cli.hpp"

int main(int argc, char** argv) { return cohnet::cli_main(argc, argv); }

#include "rfs/cli.hpp"

int main(int argc, char** argv) { return rfs::run_cli(argc, argv); }

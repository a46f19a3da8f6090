#include "sparsestruct/cli.hpp"

int main(int argc, char** argv) { return sparsestruct::run_cli(argc, argv); }

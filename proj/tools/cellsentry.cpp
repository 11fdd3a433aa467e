#include "cellsentry/cli.hpp"

int main(int argc, char** argv) { return cellsentry::run_cli(argc, argv); }

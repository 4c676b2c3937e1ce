#include "kbd/cli.hpp"

int main(int argc, char** argv) { return kbd::run_cli(argc, argv); }

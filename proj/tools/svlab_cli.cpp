#include <iostream>

#include "svlab/cli.hpp"

int main(int argc, char** argv) { return svlab::cli::run_command(argc, argv, std::cout, std::cerr); }

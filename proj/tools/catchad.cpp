#include "catchad/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return catchad::cli::run_cli(argc, argv, std::cout, std::cerr); }

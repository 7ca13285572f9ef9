#include <iostream>

#include "ainx/cli.hpp"

int main(int argc, char** argv) { return ainx::cli::cli_main(argc, argv, std::cout, std::cerr); }

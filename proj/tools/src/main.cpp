#include <iostream>

#include "idnmf/cli.hpp"

int main(int argc, char** argv) { return idnmf::cli::cli_main(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "mechdet/cli.hpp"

int main(int argc, char** argv) { return mechdet::cli::run(argc, argv, std::cout, std::cerr); }

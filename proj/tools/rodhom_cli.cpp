#include <iostream>

#include "rodhom/cli.hpp"

int main(int argc, char** argv) { return rodhom::cli::run(argc, argv, std::cout, std::cerr); }

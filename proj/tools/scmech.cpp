#include <iostream>

#include "scmech/cli.hpp"

int main(int argc, char** argv) { return scmech::cli::run(argc, argv, std::cout, std::cerr); }

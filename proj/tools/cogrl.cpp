#include <iostream>

#include "cogrl/cli.hpp"

int main(int argc, char** argv) { return cogrl::cli::run(argc, argv, std::cout, std::cerr); }

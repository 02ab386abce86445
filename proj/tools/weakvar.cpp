#include <iostream>

#include "weakvar/cli.hpp"

int main(int argc, char** argv) { return weakvar::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "kpgen/cli/app.hpp"

int main(int argc, char** argv) { return kpgen::cli::run(argc, argv, std::cout, std::cerr); }

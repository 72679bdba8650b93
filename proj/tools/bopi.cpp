#include <iostream>

#include "bopi/cli.hpp"

int main(int argc, char** argv) { return bopi::cli::run(argc, argv, std::cout, std::cerr); }

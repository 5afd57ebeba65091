#include <iostream>

#include "priceband/cli.hpp"

int main(int argc, char** argv) { return priceband::cli::run_main(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return et2q::cli::run(argc, argv, std::cout, std::cerr); }

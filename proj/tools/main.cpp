#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return vfest::cli::run(argc, argv, std::cout, std::cerr); }

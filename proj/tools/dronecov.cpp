#include <iostream>

#include "dronecov/cli.hpp"

int main(int argc, char** argv) { return dronecov::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "exk/cli.hpp"

int main(int argc, char** argv) { return exk::run_cli(argc, argv, std::cout, std::cerr); }

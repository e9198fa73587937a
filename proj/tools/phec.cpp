#include "phec/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return phec::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "csll/cli.hpp"

int main(int argc, char** argv) { return csll::run_cli(argc, argv, std::cout, std::cerr); }

#include "tats/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return tats::run_cli(argc, argv, std::cout, std::cerr); }

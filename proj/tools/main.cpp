#include <iostream>

#include "uavmon/cli.hpp"

int main(int argc, char** argv) { return uavmon::run_cli(argc, argv, std::cin, std::cout, std::cerr); }

#include <iostream>

#include "dgne/cli.hpp"

int main(int argc, char** argv) { return dgne::run_cli(argc, argv, std::cout, std::cerr); }

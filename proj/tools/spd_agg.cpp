#include <iostream>

#include "spdagg/commands.hpp"

int main(int argc, char** argv) { return spdagg::run_cli(argc, argv, std::cout, std::cerr); }

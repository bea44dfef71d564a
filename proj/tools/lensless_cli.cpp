#include "lensless/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return lensless::run_cli(argc, argv, std::cout, std::cerr); }

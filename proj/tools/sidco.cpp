#include <iostream>

#include "sidco/cli.hpp"

int main(int argc, char** argv) { return sidco::run_cli(argc, argv, std::cout, std::cerr); }

#include "mklrate/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mklrate::run_cli(argc, argv, std::cout, std::cerr); }

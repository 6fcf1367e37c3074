#include "gwcouple/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gwcouple::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "gnas/cli.hpp"

int main(int argc, char** argv) { return gnas::cli_dispatch(argc, argv, std::cout, std::cerr); }

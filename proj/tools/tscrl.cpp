#include <iostream>

#include "tsc/cli.hpp"

int main(int argc, char** argv) { return tsc::cli::dispatch(argc, argv, std::cout, std::cerr); }

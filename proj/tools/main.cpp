#include <iostream>

#include "rrg/cli/dispatch.hpp"

int main(int argc, char** argv) { return rrg::cli::dispatch(argc, argv, std::cout, std::cerr); }

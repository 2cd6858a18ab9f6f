#include <iostream>

#include "idtrace/cli.hpp"

int main(int argc, char** argv) { return idtrace::cli::dispatch(argc, argv, std::cin, std::cout, std::cerr); }

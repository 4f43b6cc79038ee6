#include <iostream>

#include "popproj/commands.hpp"

int main(int argc, char** argv) { return popproj::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "qrelax/cli.hpp"

int main(int argc, char** argv) { return qrelax::cli::run(argc, argv, std::cout, std::cerr); }

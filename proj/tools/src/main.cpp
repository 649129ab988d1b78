#include "cpredict/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cpredict::cli::run(argc, argv, std::cout, std::cerr); }

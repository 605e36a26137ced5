#include <iostream>

#include "common.hpp"

int main(int argc, char** argv) { return granulometer::cli::run(argc, argv, std::cerr); }

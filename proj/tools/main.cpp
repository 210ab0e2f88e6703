#include "elfdesign/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return elfdesign::run(argc, argv, std::cout, std::cerr); }

#include "drsafe/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return drsafe::cli::run(argc, argv, std::cerr); }

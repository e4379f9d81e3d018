#include <iostream>

#include "neural_linucb/cli.hpp"

int main(int argc, char** argv) { return nlucb::RunCli(argc, argv, std::cout, std::cerr); }

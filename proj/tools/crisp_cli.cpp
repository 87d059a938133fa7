#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return crisp::run_cli(argc, argv, std::cerr); }

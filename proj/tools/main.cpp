#include <iostream>

#include "polyhaz/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return polyhaz::run_cli(args, std::cout, std::cerr);
}

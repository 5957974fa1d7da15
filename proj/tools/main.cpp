#include <iostream>
#include <string>
#include <vector>

#include "scenu/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return scenu::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "sfm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sfm::run_cli(args, std::cout, std::cerr);
}

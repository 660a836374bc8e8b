#include <iostream>
#include <string>
#include <vector>

#include "screekit/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return screekit::run_cli(args, std::cout, std::cerr);
}

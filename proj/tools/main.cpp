#include <iostream>
#include <string>
#include <vector>

#include "pentadrive/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return pentadrive::run_cli(args, std::cout, std::cerr);
}

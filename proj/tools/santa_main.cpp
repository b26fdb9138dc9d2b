#include <iostream>
#include <string>
#include <vector>

#include "santa/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return santa::run_cli(std::move(args), std::cout, std::cerr);
}

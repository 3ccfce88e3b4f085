#include <iostream>
#include <string>
#include <vector>

#include "autogets/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return autogets::cli::run_cli(args, std::cout, std::cerr);
}

#include <iostream>

#include "l2r_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return l2r::cli::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "threshtest/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return threshtest::cli::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "driftls/harness/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return driftls::harness::run_cli(args, std::cout, std::cerr);
}

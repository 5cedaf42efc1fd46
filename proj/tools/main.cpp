#include <iostream>
#include <string>
#include <vector>

#include "riskbound/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return riskbound::cli::run(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "sensalign/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return sensalign::run_cli(args, std::cout, std::cerr);
}

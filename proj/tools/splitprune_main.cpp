#include <iostream>
#include <string>
#include <vector>

#include "splitprune/cli.hpp"
#include "splitprune/neural.hpp"

int main(int argc, char** argv) {
  splitprune::tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return splitprune::cli::run(args, std::cout, std::cerr);
}

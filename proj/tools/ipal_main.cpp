#include <iostream>

#include "ipal/cli/cli.hpp"

int main(int argc, char** argv) {
  return ipal::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}

#include <iostream>

#include "dpn/cli.hpp"

int main(int argc, char** argv) {
  return dpn::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

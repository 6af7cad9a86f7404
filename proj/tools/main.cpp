#include <iostream>

#include "siamgrid/cli/commands.hpp"

int main(int argc, char** argv) {
  return siamgrid::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

#include <iostream>

#include "privbcast/cli/experiment.hpp"

int main(int argc, char** argv) {
  return privbcast::cli::main_entry(argc, argv, std::cout, std::cerr);
}

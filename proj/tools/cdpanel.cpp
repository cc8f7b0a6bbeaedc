#include <iostream>

#include "cdpanel/cli.hpp"

int main(int argc, char** argv) {
  return cdpanel::run_cli(argc, argv, std::cout, std::cerr);
}

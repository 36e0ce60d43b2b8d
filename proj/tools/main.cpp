#include <iostream>

#include "langdepth/cli.hpp"

int main(int argc, char** argv) {
  return langdepth::cli::run(argc, argv, std::cout, std::cerr);
}

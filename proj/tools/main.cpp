#include <iostream>

#include "streamflow/harness.hpp"

int main(int argc, char** argv) {
  return streamflow::harness::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}

#include <string>
#include <vector>

#include "dsr/experiments.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dsr::run_cli(args);
}

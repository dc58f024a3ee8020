#include <string>
#include <vector>

#include "xbar/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return xbar::run_cli(std::move(args));
}

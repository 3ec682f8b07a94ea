#include <string>
#include <vector>

#include "duoguard/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return duoguard::run_cli(args);
}

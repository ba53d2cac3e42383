#include <signal.h>

#include <iostream>

#include "ramstore/cli.hpp"

int main(int argc, char** argv) {
  signal(SIGPIPE, SIG_IGN);
  return ramstore::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

#include "textnorm/cli.hpp"

int main(int argc, char** argv) {
  return textnorm::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}

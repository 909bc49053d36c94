#include "prism/cli.hpp"

int main(int argc, char** argv) {
  return prism::cli::run(argc, argv);
}

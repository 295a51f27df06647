#include "plshoot/cli.hpp"

int main(int argc, char** argv) {
  return plshoot::cli::run(argc, argv);
}

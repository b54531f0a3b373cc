#include "uspcov/cli.hpp"

int main(int argc, char** argv) {
  return uspcov::cli_main(argc, const_cast<const char* const*>(argv));
}

#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "tignn/platform.hpp"

int main(int argc, char** argv) {
  tignn::tune_allocator();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}

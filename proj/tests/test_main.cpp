#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "kgcal/log.hpp"

int main(int argc, char** argv) {
  kgcal::log::set_level(kgcal::log::Level::off);
  doctest::Context context(argc, argv);
  return context.run();
}

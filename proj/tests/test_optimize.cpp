#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qoc/optimize.hpp"

TEST_CASE("stub") { CHECK(true); }

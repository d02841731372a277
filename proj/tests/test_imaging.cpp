#include <doctest.h>
#include "flexhdr/ops.hpp"
TEST_CASE("placeholder") { CHECK(true); }

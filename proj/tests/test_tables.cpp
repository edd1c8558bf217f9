#include "doctest.h"
#include "tables.hpp"

using namespace hgp;

// Fills the shared cache so later suites only load.
TEST_SUITE("tables") {

TEST_CASE("default tables are available") {
  for (const auto& [model, beta] :
       {std::pair{ModelTag::k3d, 1.0}, std::pair{ModelTag::k4d, 1.0}}) {
    const auto table = testing::default_table(model, beta);
    CHECK(table->model == model);
    CHECK(table->beta == beta);
    CHECK(std::filesystem::exists(testing::table_path(model, beta)));
  }
}

}  // TEST_SUITE

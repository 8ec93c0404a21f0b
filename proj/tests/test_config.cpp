#include <catch_amalgamated.hpp>

#include <sstream>

#include "mqshmm/config.hpp"
#include "mqshmm/errors.hpp"

using namespace mqshmm;
using Catch::Approx;

TEST_CASE("config: parse sections and units", "[config]") {
  std::istringstream in(
      "[geometry]\ngrains = 2\nL_um = 800\ncell_n = 8\n"
      "[time]\nn_steps_macro = 10\nn_steps_meso = 50\n"
      "[source]\njs0 = 1e9\nf_hz = 25000\n"
      "[run]\nmode = wr\n[output]\ndir = results\n");
  const RunConfig c = parse_config(in);
  CHECK(c.grains == 2);
  CHECK(c.geometry.L == Approx(800e-6));
  CHECK(c.cell_n == 8);
  CHECK(c.n_steps_macro == 10);
  CHECK(c.n_steps_meso == 50);
  CHECK(c.source.j_s0 == 1e9);
  CHECK(c.source.f == 25000);
  CHECK(c.mode == "wr");
  CHECK(c.out_dir == "results");
}

TEST_CASE("config: round trip through write_config", "[config]") {
  RunConfig c;
  c.grains = 3;
  c.wr_tol = 3e-9;
  c.mode = "cost";
  std::ostringstream out;
  write_config(out, c);
  std::istringstream in(out.str());
  const RunConfig d = parse_config(in);
  CHECK(d.grains == 3);
  CHECK(d.wr_tol == Approx(3e-9));
  CHECK(d.mode == "cost");
  CHECK(d.geometry.e_gap == Approx(c.geometry.e_gap));
}

TEST_CASE("config: malformed input is rejected", "[config]") {
  for (const char* text : {"[geometry]\nunknown_key = 1\n", "[nosuch]\nx = 1\n", "[geometry]\ngrains = two\n",
                           "[time]\nn_steps_macro = 10\nn_steps_meso = 15\n", "[run]\nmode = fast\n"}) {
    std::istringstream in(text);
    CHECK_THROWS_AS(parse_config(in), ConfigError);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), ConfigError);
  CHECK(valid_mode("compare"));
  CHECK_FALSE(valid_mode("fast"));
}

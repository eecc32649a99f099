#include <doctest.h>

#include "ncgru/errors.hpp"
#include "ncgru/gradcheck.hpp"

using namespace ncgru;

TEST_CASE("relative_error") {
  CHECK(relative_error({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(relative_error({0.0}, {0.0}) == 0.0);
  CHECK(relative_error({3.0, 0.0}, {0.0, 4.0}) == doctest::Approx(5.0 / 4.0));
  CHECK_THROWS_AS(relative_error({1.0}, {}), ShapeError);
}

TEST_CASE("cayley scope passes at n = 6") {
  GradcheckOptions o;
  o.hidden = 6;
  const GradcheckReport r = run_gradcheck(GradcheckScope::Cayley, o);
  CHECK(r.passed);
  CHECK(r.tolerance == 1e-6);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("cell scope passes and reports exact zeros") {
  const GradcheckReport r = run_gradcheck(GradcheckScope::Cell);
  CHECK(r.passed);
  CHECK(r.zero_grad_exact);
  CHECK(r.entries.size() == 20);
}

TEST_CASE("bptt scope passes at length 5") {
  GradcheckOptions o;
  o.length = 5;
  const GradcheckReport r = run_gradcheck(GradcheckScope::Bptt, o);
  CHECK(r.passed);
  CHECK(r.max_rel_error < 1e-5);
  CHECK(r.instances == 2 * o.instances);
}

TEST_CASE("report formatting and scope names") {
  const GradcheckReport r = run_gradcheck(GradcheckScope::Cayley);
  CHECK(format_report(r).find("PASS") != std::string::npos);
  CHECK(gradcheck_scope_from_string("bptt") == GradcheckScope::Bptt);
  CHECK_THROWS(gradcheck_scope_from_string("all"));
  GradcheckOptions o;
  o.hidden = 1;
  CHECK_THROWS_AS(run_gradcheck(GradcheckScope::Cell, o), RangeError);
}

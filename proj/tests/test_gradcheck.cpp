// tests/test_gradcheck.cpp

// Copyright 2026  The svc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include "gradcheck.hpp"

namespace svc {
namespace {

void run_check(test::Which which, const char* label) {
  const test::GradcheckResult r = test::gradient_check(which);
  INFO(label << " worst relative error " << r.worst_rel << " at " << r.worst);
  CHECK(r.checked == 20);
  CHECK(r.passed == r.checked);
}

}  // namespace

TEST_SUITE("gradcheck") {

TEST_CASE("reconstruction loss gradient") { run_check(test::Which::kRecon, "L_recon"); }
TEST_CASE("singer confusion loss gradient") { run_check(test::Which::kSinger, "L_s"); }
TEST_CASE("pitch regression loss gradient") { run_check(test::Which::kPitch, "L_p"); }
TEST_CASE("total loss gradient") { run_check(test::Which::kTotal, "L_total"); }
TEST_CASE("adversary loss gradient") { run_check(test::Which::kAdversary, "L_ad"); }

}  // TEST_SUITE

}  // namespace svc

// Copyright 2026 The gsp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>

#include "gsp/gradcheck.hpp"
#include "gsp/ops.hpp"
#include "gsp/tape.hpp"
#include "test_util.hpp"

namespace gsp {
namespace {

TEST(Tensor, HandlesShareStorageAndCloneCopies) {
  Tensor<float> a({2, 3}, 1.0f);
  Tensor<float> b = a;
  b[4] = 7.0f;
  EXPECT_EQ(a[4], 7.0f);
  Tensor<float> c = a.clone();
  c[4] = 0.0f;
  EXPECT_EQ(a[4], 7.0f);
  EXPECT_EQ(a.at({1, 1}), 7.0f);
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 0}), ShapeError);
}

TEST(Tensor, ItemRequiresOneElement) {
  EXPECT_EQ(Tensor<double>::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor<double>::zeros({2}).item(), ShapeError);
}

TEST(Tensor, CastConvertsPrecision) {
  Tensor<double> d({3}, std::vector<double>{0.5, -1.25, 3.0});
  const Tensor<float> f = d.cast<float>();
  EXPECT_EQ(f[1], -1.25f);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    (void)c;
  }
  EXPECT_NE(Rng(42).next(), Rng(43).next());
}

TEST(Rng, BelowStaysInRange) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(r.below(7), 7u);
}

TEST(Tape, BackwardOfSumIsOnes) {
  Tape<double> tape;
  auto x = test::random<double>({2, 3}, 1);
  x.set_requires_grad(true);
  tape.backward(sum(tape, x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Tape, ProductRule) {
  Tape<double> tape;
  Tensor<double> x({1}, std::vector<double>{3.0});
  x.set_requires_grad(true);
  // d/dx (x * x) = 2x
  tape.backward(sum(tape, mul(tape, x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Tape, LeafGradientsAccumulateAcrossBackwardCalls) {
  auto x = test::random<double>({4}, 2);
  x.set_requires_grad(true);
  for (int i = 0; i < 2; ++i) {
    Tape<double> tape;
    tape.backward(sum(tape, scale(tape, x, 3.0)));
  }
  for (double g : x.grad()) EXPECT_EQ(g, 6.0);
  x.zero_grad();
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, NonScalarLossIsAContractError) {
  Tape<double> tape;
  auto x = test::random<double>({3}, 3);
  x.set_requires_grad(true);
  const auto y = scale(tape, x, 2.0);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Tape, InferenceModeRecordsNothing) {
  Tape<double> tape(false);
  auto x = test::random<double>({3}, 4);
  x.set_requires_grad(true);
  (void)sum(tape, relu(tape, x));
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, ConstantsAreNotRecorded) {
  Tape<double> tape;
  auto x = test::random<double>({3}, 5);
  (void)relu(tape, x);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(GradCheck, PassesForCorrectOp) {
  const ScalarFn fn = [](Tape<double>& t, const Tensor<double>& x) { return sum(t, gsp::tanh(t, x)); };
  EXPECT_LE(grad_check(fn, test::random<double>({5}, 6), 1e-3, 0), 1e-8);
}

TEST(GradCheck, DetectsAWrongBackwardRule) {
  // Forward x^2 with a deliberately wrong backward of 3x.
  const ScalarFn fn = [](Tape<double>& t, const Tensor<double>& x) {
    Tensor<double> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] * x[i];
    if (t.should_record({&x})) {
      t.record({x}, y, [xs = Tensor<double>(x), y]() mutable {
        for (std::size_t i = 0; i < xs.numel(); ++i) xs.grad_mut()[i] += 3.0 * xs[i] * y.grad()[i];
      });
    }
    return sum(t, y);
  };
  EXPECT_GT(grad_check(fn, test::random<double>({4}, 7, 0.5, 1.0), 1e-4, 0), 0.1);
}

TEST(GradCheck, ReportsNaNWithIndex) {
  const ScalarFn fn = [](Tape<double>& t, const Tensor<double>& x) {
    Tensor<double> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = i == 2 ? std::nan("") : x[i];
    if (t.should_record({&x})) {
      t.record({x}, y, [xs = Tensor<double>(x), y]() mutable {
        for (std::size_t i = 0; i < xs.numel(); ++i) xs.grad_mut()[i] += i == 2 ? std::nan("") : y.grad()[i];
      });
    }
    return sum(t, y);
  };
  try {
    grad_check(fn, test::random<double>({4}, 8), 1e-4, 0);
    FAIL() << "expected RangeError";
  } catch (const RangeError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
}

TEST(GradCheck, RejectsNonDeterministicFunctions) {
  auto counter = std::make_shared<int>(0);
  const ScalarFn fn = [counter](Tape<double>& t, const Tensor<double>& x) {
    return sum(t, scale(t, x, static_cast<double>(++*counter)));
  };
  EXPECT_THROW(grad_check(fn, test::random<double>({2}, 9), 1e-4, 0), ContractError);
}

TEST(GradCheck, StepsAwayFromReluKinks) {
  // Every entry sits exactly on the kink; the check must restart and pass.
  const ScalarFn fn = [](Tape<double>& t, const Tensor<double>& x) { return sum(t, relu(t, x)); };
  const auto rep = grad_check_report(fn, Tensor<double>::zeros({6}), 1e-4, 11);
  EXPECT_GT(rep.restarts, 0);
  EXPECT_LE(rep.max_rel_error, 1e-8);
}

TEST(BranchRecorder, FingerprintTracksReluMasks) {
  Tape<double> tape(false);
  auto fp = [&](double v) {
    BranchRecorder::Scope scope;
    (void)relu(tape, Tensor<double>({1}, std::vector<double>{v}));
    return scope.fingerprint();
  };
  EXPECT_EQ(fp(0.5), fp(0.7));
  EXPECT_NE(fp(0.5), fp(-0.5));
}

}  // namespace
}  // namespace gsp

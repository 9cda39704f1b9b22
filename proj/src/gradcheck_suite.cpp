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


#include "gsp/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>

#include "gsp/gradcheck.hpp"
#include "gsp/gsf.hpp"
#include "gsp/models.hpp"
#include "gsp/ops.hpp"
#include "gsp/pose.hpp"
#include "gsp/rng.hpp"

namespace gsp {

namespace {

using D = double;

Tensor<D> rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor<D>::uniform(std::move(shape), lo, hi, rng);
}

// Scalar probe: sum(out * R) with a fixed random R, so every output element
// contributes with its own weight.
Tensor<D> project(Tape<D>& tape, const Tensor<D>& out, const Tensor<D>& r) { return sum(tape, mul(tape, out, r)); }

struct Probe {
  std::string input;
  Tensor<D> at;
  ScalarFn fn;
};

using CaseBuilder = std::function<std::vector<Probe>(Rng&)>;

std::vector<Probe> conv2d_case(Rng& rng) {
  const std::size_t stride = rng.bernoulli(0.5) ? 1 : 2;
  auto x = rand_tensor({2, 3, 6, 6}, rng);
  auto w = rand_tensor({4, 3, 3, 3}, rng);
  auto b = rand_tensor({4}, rng);
  const std::size_t out = stride == 1 ? 6 : 3;
  auto r = rand_tensor({2, 4, out, out}, rng);
  auto run = [=](Tape<D>& t, const Tensor<D>& xx, const Tensor<D>& ww, const Tensor<D>& bb) {
    return project(t, conv2d(t, xx, ConvParams<D>{ww, bb, {stride, stride}, {1, 1}}), r);
  };
  return {{"x", x, [=](Tape<D>& t, const Tensor<D>& v) { return run(t, v, w, b); }},
          {"weight", w, [=](Tape<D>& t, const Tensor<D>& v) { return run(t, x, v, b); }},
          {"bias", b, [=](Tape<D>& t, const Tensor<D>& v) { return run(t, x, w, v); }}};
}

std::vector<Probe> conv3d_case(Rng& rng) {
  auto x = rand_tensor({1, 2, 4, 5, 5}, rng);
  auto w = rand_tensor({3, 2, 3, 3, 3}, rng);
  auto b = rand_tensor({3}, rng);
  auto r = rand_tensor({1, 3, 4, 5, 5}, rng);
  auto run = [=](Tape<D>& t, const Tensor<D>& xx, const Tensor<D>& ww, const Tensor<D>& bb) {
    return project(t, conv3d(t, xx, ConvParams<D>{ww, bb, {1, 1, 1}, {1, 1, 1}}), r);
  };
  return {{"x", x, [=](Tape<D>& t, const Tensor<D>& v) { return run(t, v, w, b); }},
          {"weight", w, [=](Tape<D>& t, const Tensor<D>& v) { return run(t, x, v, b); }},
          {"bias", b, [=](Tape<D>& t, const Tensor<D>& v) { return run(t, x, w, v); }}};
}

std::vector<Probe> linear_case(Rng& rng) {
  auto x = rand_tensor({3, 5}, rng);
  auto w = rand_tensor({4, 5}, rng);
  auto b = rand_tensor({4}, rng);
  auto r = rand_tensor({3, 4}, rng);
  return {{"x", x, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, linear(t, v, w, b), r); }},
          {"weight", w, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, linear(t, x, v, b), r); }},
          {"bias", b, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, linear(t, x, w, v), r); }}};
}

std::vector<Probe> batch_norm_case(Rng& rng, Mode mode) {
  auto x = rand_tensor({4, 3, 2, 2}, rng);
  auto r = rand_tensor({4, 3, 2, 2}, rng);
  auto state = BatchNormState<D>::make(3);
  state.gamma = rand_tensor({3}, rng, 0.5, 1.5);
  state.beta = rand_tensor({3}, rng);
  state.running_mean = rand_tensor({3}, rng);
  state.running_var = rand_tensor({3}, rng, 0.5, 2.0);
  state.mode = mode;
  // Train mode updates running statistics; each evaluation gets a fresh copy.
  auto run = [=](Tape<D>& t, const Tensor<D>& xx, const Tensor<D>& g) {
    auto s = state;
    s.gamma = g;
    s.running_mean = state.running_mean.clone();
    s.running_var = state.running_var.clone();
    return project(t, batch_norm(t, xx, s), r);
  };
  const Tensor<D> gamma = state.gamma;
  return {{"x", x, [=](Tape<D>& t, const Tensor<D>& v) { return run(t, v, gamma); }},
          {"gamma", gamma, [=](Tape<D>& t, const Tensor<D>& v) { return run(t, x, v); }}};
}

std::vector<Probe> l2_case(Rng& rng) {
  auto x = rand_tensor({3, 6}, rng);
  auto r = rand_tensor({3, 6}, rng);
  return {{"x", x, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, l2_normalize(t, v), r); }}};
}

std::vector<Probe> attention_case(Rng& rng) {
  auto tokens = rand_tensor({2, 3, 8}, rng);
  auto r = rand_tensor({2, 3, 8}, rng);
  const auto p = AttentionParams<D>::make(8, 2, rng);
  auto with_wq = [=](const Tensor<D>& wq) {
    auto q = p;
    q.wq = wq;
    return q;
  };
  auto with_wv = [=](const Tensor<D>& wv) {
    auto q = p;
    q.wv = wv;
    return q;
  };
  return {{"tokens", tokens, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, multi_head_attention(t, v, p), r); }},
          {"wq", p.wq, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, multi_head_attention(t, tokens, with_wq(v)), r); }},
          {"wv", p.wv, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, multi_head_attention(t, tokens, with_wv(v)), r); }}};
}

std::vector<Probe> gsf_case(Rng& rng) {
  auto x = rand_tensor({1, 4, 3, 4, 4}, rng);
  auto r = rand_tensor({1, 4, 3, 4, 4}, rng);
  auto p = GsfBlockParams<D>::make(3);
  p.gate_forward.weight = rand_tensor(p.gate_forward.weight.shape(), rng, -0.5, 0.5);
  p.gate_backward.weight = rand_tensor(p.gate_backward.weight.shape(), rng, -0.5, 0.5);
  p.alpha_forward = rand_tensor({2}, rng, 0.5, 1.5);
  p.beta_backward = rand_tensor({1}, rng, 0.5, 1.5);
  auto with_gate = [=](const Tensor<D>& w) {
    auto q = p;
    q.gate_forward.weight = w;
    return q;
  };
  auto with_alpha = [=](const Tensor<D>& a) {
    auto q = p;
    q.alpha_forward = a;
    return q;
  };
  return {{"x", x, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, gsf_block(t, v, p), r); }},
          {"gate_forward.weight", p.gate_forward.weight,
           [=](Tape<D>& t, const Tensor<D>& v) { return project(t, gsf_block(t, x, with_gate(v)), r); }},
          {"alpha_forward", p.alpha_forward,
           [=](Tape<D>& t, const Tensor<D>& v) { return project(t, gsf_block(t, x, with_alpha(v)), r); }}};
}

std::vector<Probe> pose_mlp_case(Rng& rng) {
  auto poses = rand_tensor({2, 3, kPoseFeatureDim}, rng, 0.0, 1.0);
  auto r = rand_tensor({2, 3, 6}, rng);
  const auto p = PoseMlpParams<D>::make(6, rng.bernoulli(0.5), rng, {8, 8});
  auto with_fc1 = [=](const Tensor<D>& w) {
    auto q = p;
    q.weights[0] = w;
    return q;
  };
  return {{"poses", poses, [=](Tape<D>& t, const Tensor<D>& v) { return project(t, pose_embed(t, v, p), r); }},
          {"fc1.weight", p.weights[0],
           [=](Tape<D>& t, const Tensor<D>& v) { return project(t, pose_embed(t, poses, with_fc1(v)), r); }}};
}

std::vector<Probe> late_fusion_case(Rng& rng) {
  ModelConfig cfg;
  cfg.variant = Variant::Late;
  cfg.backbone.widths = {4, 8};
  cfg.backbone.segments = 2;
  cfg.heads = 2;
  cfg.pose_hidden = {8, 8};
  auto model = std::make_shared<FusionModel<D>>(cfg, rng.next());
  // Open the gates so the temporal path carries gradient.
  for (auto& st : model->backbone().stages()) {
    for (auto* g : {&st.gsf.gate_forward, &st.gsf.gate_backward}) {
      for (auto& v : g->weight.data()) v = rng.uniform(-0.3, 0.3);
    }
  }
  model->set_mode(Mode::Eval);
  auto frames = rand_tensor({2, 2, 3, 8, 8}, rng, 0.0, 1.0);
  auto poses = rand_tensor({2, 2, kPoseFeatureDim}, rng, 0.0, 1.0);
  auto r = rand_tensor({2, 2}, rng);
  return {{"frames", frames,
           [=](Tape<D>& t, const Tensor<D>& v) { return project(t, model->late_fusion_forward(t, v, poses), r); }},
          {"poses", poses,
           [=](Tape<D>& t, const Tensor<D>& v) { return project(t, model->late_fusion_forward(t, frames, v), r); }}};
}

std::vector<Probe> cross_entropy_case(Rng& rng) {
  auto logits = rand_tensor({4, 3}, rng, -2.0, 2.0);
  std::vector<int> labels(4);
  for (auto& l : labels) l = static_cast<int>(rng.below(3));
  return {{"logits", logits, [=](Tape<D>& t, const Tensor<D>& v) { return softmax_cross_entropy(t, v, labels); }}};
}

}  // namespace

std::vector<GradSuiteResult> run_gradcheck_suite(std::size_t seeds, double step) {
  const std::vector<std::pair<std::string, CaseBuilder>> cases = {
      {"conv2d", conv2d_case},
      {"conv3d", conv3d_case},
      {"linear", linear_case},
      {"batch_norm-eval", [](Rng& r) { return batch_norm_case(r, Mode::Eval); }},
      {"batch_norm-train", [](Rng& r) { return batch_norm_case(r, Mode::Train); }},
      {"l2_normalize", l2_case},
      {"attention", attention_case},
      {"gsf_block", gsf_case},
      {"pose_mlp", pose_mlp_case},
      {"softmax_cross_entropy", cross_entropy_case},
      {"late_fusion_model", late_fusion_case},
  };
  std::vector<GradSuiteResult> results;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    GradSuiteResult res;
    res.op = cases[c].first;
    for (std::size_t s = 0; s < seeds; ++s) {
      Rng rng(derive_seed(0x6C4ECC, c, s));
      for (const auto& probe : cases[c].second(rng)) {
        const auto rep = grad_check_report(probe.fn, probe.at, step, derive_seed(s, c, 1));
        res.max_rel_error = std::max(res.max_rel_error, rep.max_rel_error);
        res.restarts += rep.restarts;
        ++res.checks;
      }
    }
    results.push_back(res);
  }
  return results;
}

}  // namespace gsp

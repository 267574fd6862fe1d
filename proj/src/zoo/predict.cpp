// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/zoo/predict.hpp"

#include <algorithm>
#include <cmath>

#include "fsa/common/errors.hpp"

namespace fsa::zoo {

std::vector<double> softmax_posterior(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(logits[k] - top);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<Tensor> window_outputs(const ModelGraph& model, std::span<const LabeledClip> clips,
                                   std::size_t window, std::size_t hop, std::size_t batch) {
  if (hop == 0 || batch == 0) throw ArgumentError("window_outputs: hop and batch must be >= 1");
  struct Ref {
    std::size_t clip, index;
  };
  std::vector<Ref> refs;
  std::vector<std::size_t> counts(clips.size());
  for (std::size_t c = 0; c < clips.size(); ++c) {
    counts[c] = frontend::window_count(clips[c].spec.dim(1), window, hop);
    if (counts[c] == 0) {
      throw ArgumentError("clip " + clips[c].clip_id + " is narrower than one window");
    }
    for (std::size_t w = 0; w < counts[c]; ++w) refs.push_back({c, w});
  }
  std::vector<Tensor> out(clips.size());
  const std::size_t n_out = model.n_outputs();
  for (std::size_t c = 0; c < clips.size(); ++c) out[c] = Tensor({counts[c], n_out});

  for (std::size_t start = 0; start < refs.size(); start += batch) {
    const std::size_t stop = std::min(refs.size(), start + batch);
    std::vector<Tensor> windows;
    windows.reserve(stop - start);
    for (std::size_t r = start; r < stop; ++r) {
      windows.push_back(
          frontend::slice_frames(clips[refs[r].clip].spec, refs[r].index * hop, window));
    }
    std::vector<const Tensor*> ptrs;
    for (const auto& w : windows) ptrs.push_back(&w);
    const Tensor y = model.infer(stack_batch(ptrs));
    for (std::size_t r = start; r < stop; ++r) {
      const Ref& ref = refs[r];
      std::copy_n(y.raw() + (r - start) * n_out, n_out, out[ref.clip].raw() + ref.index * n_out);
    }
  }
  return out;
}

std::vector<std::vector<double>> clip_posteriors(const ModelGraph& model,
                                                 std::span<const LabeledClip> clips,
                                                 std::size_t window, std::size_t hop,
                                                 const HeadFn& head, std::size_t batch) {
  const auto outputs = window_outputs(model, clips, window, hop, batch);
  std::vector<std::vector<double>> posts;
  posts.reserve(clips.size());
  for (const Tensor& o : outputs) {
    const std::size_t windows = o.dim(0), n_out = o.dim(1);
    std::vector<std::vector<double>> per_window;
    per_window.reserve(windows);
    for (std::size_t w = 0; w < windows; ++w) {
      per_window.push_back(head(std::span<const double>(o.raw() + w * n_out, n_out)));
    }
    posts.push_back(frontend::mean_posterior(per_window));
  }
  return posts;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double accuracy(const std::vector<std::vector<double>>& posteriors,
                std::span<const LabeledClip> clips) {
  if (posteriors.size() != clips.size() || clips.empty()) {
    throw ArgumentError("accuracy: posterior and clip counts differ or are zero");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    correct += static_cast<int>(argmax(posteriors[i])) == clips[i].label;
  }
  return static_cast<double>(correct) / static_cast<double>(clips.size());
}

}  // namespace fsa::zoo

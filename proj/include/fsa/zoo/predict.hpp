// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Clip-level prediction. Every clip is cut into the same windows
// windowed_predict would use; the windows of many clips are pushed through
// the model in batches and each clip's posteriors are averaged.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fsa/frontend/clip.hpp"
#include "fsa/zoo/graph.hpp"

namespace fsa::zoo {

using frontend::LabeledClip;

// Maps one row of model output to a class posterior.
using HeadFn = std::function<std::vector<double>(std::span<const double> row)>;

std::vector<double> softmax_posterior(std::span<const double> logits);

// Raw model outputs per clip, one [windows, outputs] Tensor each.
std::vector<Tensor> window_outputs(const ModelGraph& model, std::span<const LabeledClip> clips,
                                   std::size_t window, std::size_t hop, std::size_t batch = 32);

std::vector<std::vector<double>> clip_posteriors(const ModelGraph& model,
                                                 std::span<const LabeledClip> clips,
                                                 std::size_t window, std::size_t hop,
                                                 const HeadFn& head, std::size_t batch = 32);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

// Fraction of clips whose posterior argmax equals the clip label.
double accuracy(const std::vector<std::vector<double>>& posteriors,
                std::span<const LabeledClip> clips);

}  // namespace fsa::zoo

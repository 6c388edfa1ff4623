#pragma once

#include <cstdint>
#include <vector>

#include "denmix/toy/model.hpp"

namespace denmix::toy {

struct TrainOptions {
  std::uint32_t steps = 500;
  std::uint32_t batch_size = 8;
  double lr = 0.1;
  double momentum = 0.9;
  std::uint64_t seed = 7;
};

struct TrainResult {
  std::vector<double> losses;  // one entry per step, pre-update
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Plain SGD with momentum over a fixed example set: shuffles once with the
// seed, then cycles batches in order. Deterministic for fixed inputs.
// Throws TrainError naming the step if the loss goes non-finite.
TrainResult train_toy(Model& model, std::vector<Example> examples,
                      const TrainOptions& options);

// "step,loss" CSV with a header row.
std::string trace_to_csv(const TrainResult& result);

}  // namespace denmix::toy

#include "denmix/toy/train.hpp"

#include <cmath>
#include <sstream>

#include "denmix/errors.hpp"
#include "denmix/rng.hpp"

namespace denmix::toy {

TrainResult train_toy(Model& model, std::vector<Example> examples,
                      const TrainOptions& options) {
  if (options.steps == 0) throw TrainError("steps must be at least 1");
  if (options.batch_size == 0) throw TrainError("batch_size must be at least 1");
  if (examples.empty()) throw TrainError("no examples to train on");
  if (!(options.lr > 0.0)) throw TrainError("lr must be positive");
  if (options.momentum < 0.0 || options.momentum >= 1.0) {
    throw TrainError("momentum must be in [0, 1)");
  }

  RngStream order_rng = RngStream(options.seed).child("train").child("order");
  order_rng.shuffle(examples);

  std::vector<double> velocity(model.num_params(), 0.0);
  TrainResult result;
  result.losses.reserve(options.steps);

  std::size_t cursor = 0;
  std::vector<Example> batch;
  for (std::uint32_t step = 0; step < options.steps; ++step) {
    batch.clear();
    for (std::uint32_t i = 0; i < options.batch_size; ++i) {
      batch.push_back(examples[cursor]);
      cursor = (cursor + 1) % examples.size();
    }
    double loss = forward_backward(model, batch);
    if (!std::isfinite(loss)) {
      throw TrainError("loss went non-finite at step " + std::to_string(step));
    }
    result.losses.push_back(loss);

    std::vector<double>& p = model.params();
    const std::vector<double>& g = model.grads();
    for (std::size_t i = 0; i < p.size(); ++i) {
      velocity[i] = options.momentum * velocity[i] - options.lr * g[i];
      p[i] += velocity[i];
    }
  }
  result.initial_loss = result.losses.front();
  result.final_loss = result.losses.back();
  return result;
}

std::string trace_to_csv(const TrainResult& result) {
  std::ostringstream out;
  out << "step,loss\n";
  out.precision(12);
  for (std::size_t i = 0; i < result.losses.size(); ++i) {
    out << i << ',' << result.losses[i] << '\n';
  }
  return out.str();
}

}  // namespace denmix::toy

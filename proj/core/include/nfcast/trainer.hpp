#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "nfcast/metrics.hpp"
#include "nfcast/model.hpp"

namespace nfcast {

struct TrainConfig {
  std::size_t epochs = 75;
  /// Forecast pairs per optimizer step.
  std::size_t batch_size = 64;
  /// Micro-batches per optimizer step; 2 for the GNN, 1 for the baselines.
  std::size_t grad_accumulation = 1;
  std::uint64_t seed = 0;

  void validate() const;
  static TrainConfig for_model(ModelKind kind);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_compscore = 0.0;
};

struct TrainResult {
  std::vector<std::vector<double>> best_parameters;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;  // 0: no epoch ran, initial parameters kept
  std::vector<EpochRecord> history;
  bool stopped = false;  // the rung callback asked to stop
};

/// Called after every epoch with the validation compound score; returning
/// false ends training (a pruned trial).
using RungCallback = std::function<bool(std::size_t epoch, double score)>;

/// Shuffles the training pairs each epoch, accumulates per-pair gradients
/// scaled by 1 / batch size, steps Adam once per batch and keeps the
/// parameters with the best validation compound score. On return the model
/// holds those parameters. Throws Error(Diverged) on a non-finite loss.
TrainResult train(ForecastModel& model, std::span<const ForecastExample> train_pairs,
                  std::span<const ForecastExample> val_pairs, const TrainConfig& cfg,
                  const RungCallback& on_epoch = {});

/// Forecasts every pair and accumulates feature errors over the numeric
/// columns and structural predictions over all four relations.
MetricsReport evaluate(const ForecastModel& model, std::span<const ForecastExample> pairs, std::size_t n_ip_classes);

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace nfcast

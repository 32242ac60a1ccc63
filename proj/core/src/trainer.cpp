#include "nfcast/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "nfcast/error.hpp"
#include "nfcast/format.hpp"

namespace nfcast {

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch_size must be positive");
  if (grad_accumulation == 0) throw Error(ErrorKind::InvalidArgument, "grad_accumulation must be at least 1");
  if (grad_accumulation > batch_size) {
    throw Error(ErrorKind::InvalidArgument, "grad_accumulation exceeds batch_size");
  }
}

TrainConfig TrainConfig::for_model(ModelKind kind) {
  TrainConfig cfg;
  cfg.grad_accumulation = kind == ModelKind::Gnn ? 2 : 1;
  return cfg;
}

TrainResult train(ForecastModel& model, std::span<const ForecastExample> train_pairs,
                  std::span<const ForecastExample> val_pairs, const TrainConfig& cfg, const RungCallback& on_epoch) {
  cfg.validate();
  if (train_pairs.empty() || val_pairs.empty()) {
    throw Error(ErrorKind::InvalidArgument, "training needs nonempty train and validation pairs");
  }
  auto& store = model.parameters();
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = model.learning_rate();
  nn::Adam adam(store, adam_cfg);

  TrainResult result;
  result.best_parameters = store.snapshot();

  std::vector<std::size_t> order(train_pairs.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, 2 * epoch));
    shuffle_rng.shuffle(order);
    const std::uint64_t pair_stream = derive_seed(cfg.seed, 2 * epoch + 1);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t batch = std::min(cfg.batch_size, order.size() - start);
      const std::size_t micro = (batch + cfg.grad_accumulation - 1) / cfg.grad_accumulation;
      store.zero_grad();
      for (std::size_t m = 0; m < batch; m += micro) {
        for (std::size_t k = m; k < std::min(batch, m + micro); ++k) {
          const std::size_t idx = order[start + k];
          Rng rng(derive_seed(pair_stream, idx));
          const ad::Tensor loss = model.training_loss(train_pairs[idx], rng);
          const double value = loss.item();
          if (!std::isfinite(value)) {
            throw Error(ErrorKind::Diverged, "non-finite loss at epoch " + std::to_string(epoch));
          }
          loss_sum += value;
          ad::backward(ad::scale(loss, 1.0 / static_cast<double>(batch)));
        }
      }
      adam.step();
    }
    store.zero_grad();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_compscore = evaluate(model, val_pairs, 0).compound_score;
    result.history.push_back(rec);
    if (rec.val_compscore > result.best_score) {
      result.best_score = rec.val_compscore;
      result.best_epoch = epoch;
      result.best_parameters = store.snapshot();
    }
    if (on_epoch && !on_epoch(epoch, rec.val_compscore)) {
      result.stopped = true;
      break;
    }
  }
  store.restore(result.best_parameters);
  return result;
}

MetricsReport evaluate(const ForecastModel& model, std::span<const ForecastExample> pairs, std::size_t n_ip_classes) {
  std::vector<Forecast> forecasts;
  forecasts.reserve(pairs.size());
  for (const auto& ex : pairs) {
    forecasts.push_back(model.forecast(ex));
    if (n_ip_classes == 0) n_ip_classes = forecasts.back().probabilities[index(Relation::SrcIp)].cols;
  }
  MetricsAccumulator acc(n_ip_classes, model.numeric_width());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    acc.add_features(forecasts[i].features, pairs[i].next_features);
    acc.add_structure(pairs[i].targets, forecasts[i].probabilities, forecasts[i].attachments);
    acc.count_pair();
  }
  return finalize(acc, std::string(to_string(model.kind())));
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_loss,val_compscore\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_compscore) << '\n';
  }
}

}  // namespace nfcast

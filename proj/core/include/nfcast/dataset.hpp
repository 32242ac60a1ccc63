#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "nfcast/config.hpp"
#include "nfcast/flow.hpp"
#include "nfcast/graph.hpp"
#include "nfcast/model.hpp"
#include "nfcast/preprocess.hpp"

namespace nfcast {

struct DatasetOptions {
  std::size_t window_length = 512;
  std::size_t stride = 512;
  std::uint64_t split_seed = 0;
  SplitRatios ratios;
  std::size_t d_place = 8;
};

/// Windows, training vocabulary, split labels and graphs for one trace.
struct PreparedData {
  DatasetOptions options;
  std::size_t n_features = 0;
  std::vector<std::shared_ptr<const Window>> windows;
  IpVocabulary vocab;
  SplitAssignment splits;
  std::vector<std::shared_ptr<const WindowGraph>> graphs;
};

/// Sorts by start time, windows, splits, builds the vocabulary from the
/// training windows and one graph per window.
PreparedData prepare_dataset(std::vector<FlowRecord> flows, const DatasetOptions& options);

/// Data directory layout: flows.csv, vocab.csv, splits.csv, meta.txt and
/// graphs/ (one file per window plus manifest.csv).
void write_dataset(const std::filesystem::path& dir, const PreparedData& data);
/// Throws Error(Corrupt) when the cached pieces disagree with each other.
PreparedData load_dataset(const std::filesystem::path& dir);

struct SplitExamples {
  std::vector<ForecastExample> train;
  std::vector<ForecastExample> val;
  std::vector<ForecastExample> test;

  std::vector<ForecastExample>& of(Split s) { return s == Split::Train ? train : s == Split::Val ? val : test; }
};

/// Pairs consecutive windows over the whole sequence; each pair belongs to
/// the split of its current window.
SplitExamples build_examples(const PreparedData& data);

/// Model from kind plus hyperparameter keys in `c` (defaults elsewhere).
std::unique_ptr<ForecastModel> make_model(ModelKind kind, const Config& c, const PreparedData& data,
                                          std::uint64_t seed);

}  // namespace nfcast

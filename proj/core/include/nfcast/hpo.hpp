#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nfcast/rng.hpp"

namespace nfcast {

struct ParamSpec {
  enum class Kind { Real, Integer, Categorical };

  std::string name;
  Kind kind = Kind::Real;
  double low = 0.0;
  double high = 1.0;
  bool log = false;
  std::vector<std::string> choices;

  static ParamSpec real(std::string name, double low, double high, bool log = false);
  static ParamSpec integer(std::string name, long low, long high);
  static ParamSpec categorical(std::string name, std::vector<std::string> choices);
};

struct SearchSpace {
  std::vector<ParamSpec> params;

  /// Throws Error(EmptySpace) for no parameters and Error(InvalidArgument)
  /// for unordered bounds, nonpositive log bounds or empty choices.
  void validate() const;
  std::size_t index_of(std::string_view name) const;
  bool contains(const std::vector<double>& values) const;
};

/// One value per parameter in space order. Categorical parameters hold the
/// choice index, integers hold an integral double.
using Assignment = std::vector<double>;

/// Text form of each value keyed by parameter name (choice text for categoricals).
std::map<std::string, std::string> to_param_map(const SearchSpace& space, const Assignment& values);
Assignment from_param_map(const SearchSpace& space, const std::map<std::string, std::string>& params);

enum class TrialStatus { Running, Pruned, Complete, Failed };
std::string_view to_string(TrialStatus s) noexcept;
TrialStatus parse_trial_status(std::string_view s);

struct TrialRecord {
  std::uint64_t id = 0;
  Assignment params;
  std::vector<std::pair<std::size_t, double>> rung_scores;  // (epoch, score), epochs increasing
  TrialStatus status = TrialStatus::Running;
  std::optional<double> final_score;  // present iff complete
};

struct ShaConfig {
  std::size_t min_resource = 8;
  std::size_t reduction_factor = 3;
  std::size_t min_early_stopping_rate = 0;
  std::size_t bootstrap_count = 2;

  void validate() const;
};

struct TpeConfig {
  std::uint64_t seed = 42;
  std::size_t n_startup = 10;
  std::size_t n_ei_candidates = 24;
  bool multivariate = true;
  bool group = true;

  void validate() const;
};

/// min_resource * eta^(s + k) for k = 0, 1, ... while <= max_epochs.
/// Throws Error(InvalidArgument) when max_epochs < the first rung.
std::vector<std::size_t> sha_rungs(const ShaConfig& cfg, std::size_t max_epochs);

/// Scores at the rung include the trial's own. Pruned iff at least
/// bootstrap_count scores exist and the score is strictly below the
/// ceil(m / eta)-th best.
bool sha_should_prune(double trial_score, std::span<const double> scores_at_rung, const ShaConfig& cfg);

/// Good-set size for n finished observations.
std::size_t tpe_gamma(std::size_t n) noexcept;

/// Below n_startup finished trials: a uniform draw. Otherwise the best of
/// n_ei_candidates draws from the good-set estimator by l(x) / g(x).
Assignment tpe_suggest(std::span<const TrialRecord> history, const SearchSpace& space, const TpeConfig& cfg,
                       Rng& rng);

/// log l(x) - log g(x) for a point, exposed for tests.
double tpe_log_ratio(std::span<const TrialRecord> history, const SearchSpace& space, const Assignment& x);

/// Handed to the objective; report() returns false once the trial is pruned.
class TrialReporter {
 public:
  virtual ~TrialReporter() = default;
  virtual bool report(std::size_t epoch, double score) = 0;
  virtual std::uint64_t trial_id() const noexcept = 0;
};

/// Returns the trial's final score. Exceptions mark the trial failed.
using Objective = std::function<double(const Assignment&, TrialReporter&)>;

struct StudyConfig {
  std::size_t n_trials = 20;
  std::size_t max_epochs = 75;
  std::size_t parallel = 1;
  ShaConfig sha;
  TpeConfig tpe;
  /// Append-only CSV; existing rows are replayed on start.
  std::optional<std::filesystem::path> journal;
};

struct StudyResult {
  TrialRecord best;
  std::vector<TrialRecord> trials;  // ordered by id
};

/// Throws Error(ObjectiveFailure) when no trial completes.
StudyResult run_study(const Objective& objective, const SearchSpace& space, const StudyConfig& cfg);

/// Replays a journal into trial records (running trials are dropped).
std::vector<TrialRecord> read_journal(const std::filesystem::path& path, const SearchSpace& space);

SearchSpace default_gnn_space();
SearchSpace default_baseline_space();

}  // namespace nfcast

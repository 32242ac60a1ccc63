#include "nfcast/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "nfcast/error.hpp"
#include "nfcast/format.hpp"

namespace nfcast {

ParamSpec ParamSpec::real(std::string name, double low, double high, bool log) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = Kind::Real;
  p.low = low;
  p.high = high;
  p.log = log;
  return p;
}

ParamSpec ParamSpec::integer(std::string name, long low, long high) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = Kind::Integer;
  p.low = static_cast<double>(low);
  p.high = static_cast<double>(high);
  return p;
}

ParamSpec ParamSpec::categorical(std::string name, std::vector<std::string> choices) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = Kind::Categorical;
  p.low = 0.0;
  p.high = choices.empty() ? 0.0 : static_cast<double>(choices.size() - 1);
  p.choices = std::move(choices);
  return p;
}

void SearchSpace::validate() const {
  if (params.empty()) throw Error(ErrorKind::EmptySpace, "search space has no parameters");
  std::set<std::string> names;
  for (const auto& p : params) {
    if (!names.insert(p.name).second) throw Error(ErrorKind::InvalidArgument, "duplicate parameter " + p.name);
    if (p.kind == ParamSpec::Kind::Categorical) {
      if (p.choices.empty()) throw Error(ErrorKind::InvalidArgument, p.name + ": no choices");
      continue;
    }
    if (!(p.low <= p.high)) throw Error(ErrorKind::InvalidArgument, p.name + ": bounds out of order");
    if (p.log && !(p.low > 0.0)) throw Error(ErrorKind::InvalidArgument, p.name + ": log scale needs positive bounds");
  }
}

std::size_t SearchSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == name) return i;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown parameter " + std::string(name));
}

bool SearchSpace::contains(const std::vector<double>& values) const {
  if (values.size() != params.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const double v = values[i];
    if (!(v >= p.low && v <= p.high)) return false;
    if (p.kind != ParamSpec::Kind::Real && v != std::round(v)) return false;
  }
  return true;
}

std::map<std::string, std::string> to_param_map(const SearchSpace& space, const Assignment& values) {
  if (values.size() != space.params.size()) throw Error(ErrorKind::ShapeMismatch, "assignment size");
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& p = space.params[i];
    switch (p.kind) {
      case ParamSpec::Kind::Real: out[p.name] = format_double(values[i]); break;
      case ParamSpec::Kind::Integer: out[p.name] = std::to_string(std::lround(values[i])); break;
      case ParamSpec::Kind::Categorical: out[p.name] = p.choices.at(static_cast<std::size_t>(values[i])); break;
    }
  }
  return out;
}

Assignment from_param_map(const SearchSpace& space, const std::map<std::string, std::string>& params) {
  Assignment out;
  for (const auto& p : space.params) {
    const auto it = params.find(p.name);
    if (it == params.end()) throw Error(ErrorKind::InvalidArgument, "missing parameter " + p.name);
    if (p.kind == ParamSpec::Kind::Categorical) {
      const auto c = std::find(p.choices.begin(), p.choices.end(), it->second);
      if (c == p.choices.end()) throw Error(ErrorKind::InvalidArgument, p.name + ": unknown choice " + it->second);
      out.push_back(static_cast<double>(c - p.choices.begin()));
    } else {
      out.push_back(parse_number<double>(it->second, p.name));
    }
  }
  return out;
}

std::string_view to_string(TrialStatus s) noexcept {
  switch (s) {
    case TrialStatus::Running: return "running";
    case TrialStatus::Pruned: return "pruned";
    case TrialStatus::Complete: return "complete";
    case TrialStatus::Failed: return "failed";
  }
  return "?";
}

TrialStatus parse_trial_status(std::string_view s) {
  for (auto t : {TrialStatus::Running, TrialStatus::Pruned, TrialStatus::Complete, TrialStatus::Failed}) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorKind::Corrupt, "unknown trial status '" + std::string(s) + "'");
}

void ShaConfig::validate() const {
  if (reduction_factor < 2) throw Error(ErrorKind::InvalidArgument, "reduction factor must be at least 2");
  if (min_resource < 1) throw Error(ErrorKind::InvalidArgument, "min resource must be at least 1");
}

void TpeConfig::validate() const {
  if (n_startup < 1) throw Error(ErrorKind::InvalidArgument, "n_startup must be at least 1");
  if (n_ei_candidates < 1) throw Error(ErrorKind::InvalidArgument, "n_ei_candidates must be at least 1");
}

std::vector<std::size_t> sha_rungs(const ShaConfig& cfg, std::size_t max_epochs) {
  cfg.validate();
  std::size_t r = cfg.min_resource;
  for (std::size_t i = 0; i < cfg.min_early_stopping_rate; ++i) r *= cfg.reduction_factor;
  if (max_epochs < r) {
    throw Error(ErrorKind::InvalidArgument,
                "max epochs " + std::to_string(max_epochs) + " below the first rung " + std::to_string(r));
  }
  std::vector<std::size_t> rungs;
  while (r <= max_epochs) {
    rungs.push_back(r);
    r *= cfg.reduction_factor;
  }
  return rungs;
}

bool sha_should_prune(double trial_score, std::span<const double> scores_at_rung, const ShaConfig& cfg) {
  const std::size_t m = scores_at_rung.size();
  if (m < cfg.bootstrap_count || m == 0) return false;
  const std::size_t k = (m + cfg.reduction_factor - 1) / cfg.reduction_factor;
  std::vector<double> sorted(scores_at_rung.begin(), scores_at_rung.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                   std::greater<>());
  return trial_score < sorted[k - 1];
}

std::size_t tpe_gamma(std::size_t n) noexcept { return std::min<std::size_t>((n + 3) / 4, 25); }

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

bool numeric(const ParamSpec& p) { return p.kind != ParamSpec::Kind::Categorical; }

double to_internal(const ParamSpec& p, double v) { return p.log ? std::log(v) : v; }

double from_internal(const ParamSpec& p, double t) {
  double v = p.log ? std::exp(t) : t;
  if (p.kind == ParamSpec::Kind::Integer) v = std::round(v);
  return std::clamp(v, p.low, p.high);
}

std::pair<double, double> internal_bounds(const ParamSpec& p) {
  if (p.kind == ParamSpec::Kind::Integer) return {p.low - 0.5, p.high + 0.5};
  return {to_internal(p, p.low), to_internal(p, p.high)};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double log_truncnorm(double x, double mu, double sigma, double lo, double hi) {
  const double z = (x - mu) / sigma;
  const double mass = normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma);
  return -0.5 * z * z - kLogSqrt2Pi - std::log(sigma) - std::log(std::max(mass, 1e-300));
}

double sample_truncnorm(double mu, double sigma, double lo, double hi, Rng& rng) {
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal(mu, sigma);
    if (x >= lo && x <= hi) return x;
  }
  return std::clamp(mu, lo, hi);
}

double logsumexp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Product-kernel Parzen estimator over numeric parameters in internal
// coordinates, with a uniform prior component; categoricals are smoothed
// marginals.
class Parzen {
 public:
  Parzen(const SearchSpace& space, const std::vector<const Assignment*>& obs) : space_(space) {
    const std::size_t n = obs.size();
    for (std::size_t d = 0; d < space.params.size(); ++d) {
      const auto& p = space.params[d];
      if (numeric(p)) {
        const auto [lo, hi] = internal_bounds(p);
        const double range = std::max(hi - lo, 1e-12);
        bandwidth_.push_back(std::max(range / static_cast<double>(std::max<std::size_t>(n, 1)), 0.01 * range));
        bounds_.emplace_back(lo, hi);
        categorical_.emplace_back();
      } else {
        bandwidth_.push_back(0.0);
        bounds_.emplace_back(0.0, 0.0);
        std::vector<double> w(p.choices.size(), 1.0);
        for (const auto* a : obs) w[static_cast<std::size_t>((*a)[d])] += 1.0;
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        for (auto& x : w) x /= total;
        categorical_.push_back(std::move(w));
      }
    }
    for (const auto* a : obs) {
      std::vector<double> mu(space.params.size(), 0.0);
      for (std::size_t d = 0; d < space.params.size(); ++d) {
        if (numeric(space.params[d])) mu[d] = to_internal(space.params[d], (*a)[d]);
      }
      centers_.push_back(std::move(mu));
    }
  }

  double log_density(const Assignment& x) const {
    const std::size_t n = centers_.size();
    const double log_w = -std::log(static_cast<double>(n + 1));
    std::vector<double> terms;
    terms.reserve(n + 1);
    double prior = log_w;
    for (std::size_t d = 0; d < space_.params.size(); ++d) {
      if (numeric(space_.params[d])) prior -= std::log(std::max(bounds_[d].second - bounds_[d].first, 1e-12));
    }
    terms.push_back(prior);
    for (const auto& mu : centers_) {
      double t = log_w;
      for (std::size_t d = 0; d < space_.params.size(); ++d) {
        if (!numeric(space_.params[d])) continue;
        t += log_truncnorm(to_internal(space_.params[d], x[d]), mu[d], bandwidth_[d], bounds_[d].first,
                           bounds_[d].second);
      }
      terms.push_back(t);
    }
    double out = logsumexp(terms);
    for (std::size_t d = 0; d < space_.params.size(); ++d) {
      if (!numeric(space_.params[d])) out += std::log(categorical_[d][static_cast<std::size_t>(x[d])]);
    }
    return out;
  }

  Assignment sample(Rng& rng) const {
    const std::size_t component = rng.uniform_int(centers_.size() + 1);
    Assignment x(space_.params.size());
    for (std::size_t d = 0; d < space_.params.size(); ++d) {
      const auto& p = space_.params[d];
      if (!numeric(p)) {
        double u = rng.uniform();
        std::size_t c = 0;
        while (c + 1 < categorical_[d].size() && u >= categorical_[d][c]) u -= categorical_[d][c++];
        x[d] = static_cast<double>(c);
        continue;
      }
      const auto [lo, hi] = bounds_[d];
      const double t = component == 0 ? rng.uniform(lo, hi)
                                      : sample_truncnorm(centers_[component - 1][d], bandwidth_[d], lo, hi, rng);
      x[d] = from_internal(p, t);
    }
    return x;
  }

 private:
  const SearchSpace& space_;
  std::vector<double> bandwidth_;
  std::vector<std::pair<double, double>> bounds_;
  std::vector<std::vector<double>> categorical_;
  std::vector<std::vector<double>> centers_;
};

Assignment uniform_sample(const SearchSpace& space, Rng& rng) {
  Assignment x;
  for (const auto& p : space.params) {
    switch (p.kind) {
      case ParamSpec::Kind::Real:
        x.push_back(p.log ? std::exp(rng.uniform(std::log(p.low), std::log(p.high))) : rng.uniform(p.low, p.high));
        break;
      case ParamSpec::Kind::Integer:
        x.push_back(p.low + static_cast<double>(rng.uniform_int(static_cast<std::uint64_t>(p.high - p.low) + 1)));
        break;
      case ParamSpec::Kind::Categorical:
        x.push_back(static_cast<double>(rng.uniform_int(p.choices.size())));
        break;
    }
    x.back() = std::clamp(x.back(), p.low, p.high);
  }
  return x;
}

// Finished trials ordered best first: deeper progress wins, then score, then id.
std::vector<const TrialRecord*> ranked_observations(std::span<const TrialRecord> history) {
  std::vector<const TrialRecord*> obs;
  for (const auto& t : history) {
    if (t.status == TrialStatus::Complete || (t.status == TrialStatus::Pruned && !t.rung_scores.empty())) {
      obs.push_back(&t);
    }
  }
  auto key = [](const TrialRecord* t) {
    if (t->status == TrialStatus::Complete) {
      return std::pair{std::numeric_limits<std::size_t>::max(), *t->final_score};
    }
    return std::pair{t->rung_scores.size(), t->rung_scores.back().second};
  };
  std::stable_sort(obs.begin(), obs.end(), [&](const TrialRecord* a, const TrialRecord* b) {
    const auto ka = key(a), kb = key(b);
    if (ka != kb) return ka > kb;
    return a->id < b->id;
  });
  return obs;
}

std::pair<Parzen, Parzen> split_estimators(const std::vector<const TrialRecord*>& obs, const SearchSpace& space) {
  const std::size_t n_good = tpe_gamma(obs.size());
  std::vector<const Assignment*> good, bad;
  for (std::size_t i = 0; i < obs.size(); ++i) (i < n_good ? good : bad).push_back(&obs[i]->params);
  return {Parzen(space, good), Parzen(space, bad)};
}

}  // namespace

double tpe_log_ratio(std::span<const TrialRecord> history, const SearchSpace& space, const Assignment& x) {
  space.validate();
  const auto obs = ranked_observations(history);
  const auto [good, bad] = split_estimators(obs, space);
  return good.log_density(x) - bad.log_density(x);
}

Assignment tpe_suggest(std::span<const TrialRecord> history, const SearchSpace& space, const TpeConfig& cfg,
                       Rng& rng) {
  space.validate();
  cfg.validate();
  const auto obs = ranked_observations(history);
  if (obs.size() < cfg.n_startup) return uniform_sample(space, rng);
  const auto [good, bad] = split_estimators(obs, space);
  Assignment best;
  double best_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cfg.n_ei_candidates; ++i) {
    Assignment x = good.sample(rng);
    const double ratio = good.log_density(x) - bad.log_density(x);
    if (best.empty() || ratio > best_ratio) {
      best_ratio = ratio;
      best = std::move(x);
    }
  }
  return best;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string journal_header(const SearchSpace& space) {
  std::string h = "trial_id";
  for (const auto& p : space.params) h += "," + p.name;
  return h + ",rung_epoch,score,status";
}

class Study {
 public:
  Study(const Objective& objective, const SearchSpace& space, const StudyConfig& cfg)
      : objective_(objective), space_(space), cfg_(cfg), rungs_(sha_rungs(cfg.sha, cfg.max_epochs)) {}

  StudyResult run() {
    if (cfg_.n_trials < 1) throw Error(ErrorKind::InvalidArgument, "a study needs at least one trial");
    if (cfg_.journal) open_journal();
    std::vector<std::uint64_t> pending;
    for (std::uint64_t id = 0; id < cfg_.n_trials; ++id) {
      if (!trials_.count(id)) pending.push_back(id);
    }
    queue_ = pending;
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg_.parallel, pending.size()));
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < workers; ++i) pool.emplace_back([this] { worker(); });
      for (auto& t : pool) t.join();
    }
    StudyResult result;
    for (const auto& [id, t] : trials_) result.trials.push_back(t);
    const TrialRecord* best = nullptr;
    for (const auto& t : result.trials) {
      if (t.status != TrialStatus::Complete) continue;
      if (!best || *t.final_score > *best->final_score) best = &t;
    }
    if (!best) throw Error(ErrorKind::ObjectiveFailure, "no trial completed");
    result.best = *best;
    return result;
  }

 private:
  class Reporter final : public TrialReporter {
   public:
    Reporter(Study& s, std::uint64_t id) : study_(s), id_(id) {}
    bool report(std::size_t epoch, double score) override { return !(pruned_ = study_.on_report(id_, epoch, score)); }
    std::uint64_t trial_id() const noexcept override { return id_; }
    bool pruned() const noexcept { return pruned_; }

   private:
    Study& study_;
    std::uint64_t id_;
    bool pruned_ = false;
  };

  void worker() {
    for (;;) {
      std::uint64_t id;
      Assignment params;
      {
        std::lock_guard lock(mu_);
        if (next_ >= queue_.size()) return;
        id = queue_[next_++];
        std::vector<TrialRecord> history;
        for (const auto& [k, t] : trials_) history.push_back(t);
        Rng rng(derive_seed(cfg_.tpe.seed, id));
        params = tpe_suggest(history, space_, cfg_.tpe, rng);
        TrialRecord rec;
        rec.id = id;
        rec.params = params;
        trials_[id] = rec;
      }
      Reporter reporter(*this, id);
      std::optional<double> score;
      bool failed = false;
      try {
        score = objective_(params, reporter);
        if (!std::isfinite(*score)) failed = true;
      } catch (const std::exception&) {
        failed = true;
      }
      std::lock_guard lock(mu_);
      TrialRecord& rec = trials_[id];
      if (failed) {
        rec.status = TrialStatus::Failed;
        journal_row(rec, std::nullopt, std::nullopt);
      } else if (reporter.pruned()) {
        rec.status = TrialStatus::Pruned;
      } else {
        rec.status = TrialStatus::Complete;
        rec.final_score = *score;
        journal_row(rec, std::nullopt, *score);
      }
    }
  }

  // Returns true when the trial should stop.
  bool on_report(std::uint64_t id, std::size_t epoch, double score) {
    std::lock_guard lock(mu_);
    TrialRecord& rec = trials_[id];
    if (rec.status == TrialStatus::Pruned) return true;
    if (std::find(rungs_.begin(), rungs_.end(), epoch) == rungs_.end()) return false;
    rec.rung_scores.emplace_back(epoch, score);
    auto& board = boards_[epoch];
    board.push_back(score);
    if (sha_should_prune(score, board, cfg_.sha)) {
      rec.status = TrialStatus::Pruned;
      journal_row(rec, epoch, score);
      return true;
    }
    journal_row(rec, epoch, score);
    return false;
  }

  void journal_row(const TrialRecord& rec, std::optional<std::size_t> epoch, std::optional<double> score) {
    if (!journal_) return;
    const auto values = to_param_map(space_, rec.params);
    journal_ << rec.id;
    for (const auto& p : space_.params) journal_ << ',' << values.at(p.name);
    journal_ << ',' << (epoch ? std::to_string(*epoch) : std::string()) << ','
             << (score ? format_double(*score) : std::string()) << ',' << to_string(rec.status) << '\n';
    journal_.flush();
  }

  void open_journal() {
    const auto& path = *cfg_.journal;
    const bool exists = std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
    if (exists) {
      for (auto& t : read_journal(path, space_)) {
        for (const auto& [epoch, score] : t.rung_scores) boards_[epoch].push_back(score);
        trials_[t.id] = std::move(t);
      }
    }
    journal_.open(path, std::ios::app);
    if (!journal_) throw Error(ErrorKind::Io, "cannot open journal " + path.string());
    if (!exists) journal_ << journal_header(space_) << '\n';
  }

  const Objective& objective_;
  const SearchSpace& space_;
  const StudyConfig& cfg_;
  std::vector<std::size_t> rungs_;
  std::mutex mu_;
  std::map<std::uint64_t, TrialRecord> trials_;
  std::map<std::size_t, std::vector<double>> boards_;
  std::vector<std::uint64_t> queue_;
  std::size_t next_ = 0;
  std::ofstream journal_;
};

}  // namespace

std::vector<TrialRecord> read_journal(const std::filesystem::path& path, const SearchSpace& space) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open journal " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != journal_header(space)) {
    throw Error(ErrorKind::Corrupt, "journal header does not match the search space");
  }
  std::map<std::uint64_t, TrialRecord> trials;
  const std::size_t n = space.params.size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != n + 4) throw Error(ErrorKind::Corrupt, "journal row width: " + line);
    const auto id = parse_number<std::uint64_t>(f[0], "trial_id");
    std::map<std::string, std::string> values;
    for (std::size_t i = 0; i < n; ++i) values[space.params[i].name] = f[1 + i];
    auto& rec = trials[id];
    rec.id = id;
    rec.params = from_param_map(space, values);
    const TrialStatus status = parse_trial_status(f[n + 3]);
    if (!f[n + 1].empty()) {
      const auto epoch = parse_number<std::size_t>(f[n + 1], "rung_epoch");
      const auto score = parse_number<double>(f[n + 2], "score");
      // A rung at or before the last one recorded means the trial was rerun.
      if (!rec.rung_scores.empty() && epoch <= rec.rung_scores.back().first) rec.rung_scores.clear();
      rec.rung_scores.emplace_back(epoch, score);
    }
    rec.status = status;
    if (status == TrialStatus::Complete) rec.final_score = parse_number<double>(f[n + 2], "score");
  }
  std::vector<TrialRecord> out;
  for (auto& [id, t] : trials) {
    if (t.status != TrialStatus::Running) out.push_back(std::move(t));
  }
  return out;
}

StudyResult run_study(const Objective& objective, const SearchSpace& space, const StudyConfig& cfg) {
  space.validate();
  cfg.tpe.validate();
  Study study(objective, space, cfg);
  return study.run();
}

SearchSpace default_gnn_space() {
  SearchSpace s;
  s.params = {ParamSpec::categorical("hidden_dim", {"32", "64", "128"}),
              ParamSpec::categorical("latent_dim", {"16", "32", "64"}),
              ParamSpec::integer("n_layers", 1, 3),
              ParamSpec::real("learning_rate", 1e-4, 1e-2, true),
              ParamSpec::real("alpha", 0.1, 0.9),
              ParamSpec::real("mask_ratio", 0.1, 0.7),
              ParamSpec::real("edge_drop_p", 0.0, 0.5),
              ParamSpec::real("dropout_p", 0.0, 0.5)};
  return s;
}

SearchSpace default_baseline_space() {
  SearchSpace s;
  s.params = {ParamSpec::categorical("hidden_dim", {"32", "64", "128"}),
              ParamSpec::categorical("octet_dim", {"4", "8", "16"}),
              ParamSpec::real("learning_rate", 1e-4, 1e-2, true),
              ParamSpec::real("alpha", 0.1, 0.9),
              ParamSpec::real("mask_ratio", 0.1, 0.7),
              ParamSpec::real("dropout_p", 0.0, 0.5)};
  return s;
}

}  // namespace nfcast

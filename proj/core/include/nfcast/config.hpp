#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "nfcast/baseline.hpp"
#include "nfcast/flow.hpp"
#include "nfcast/gnn.hpp"
#include "nfcast/trainer.hpp"

namespace nfcast {

/// Flat key=value configuration. Blank lines and lines starting with '#' are
/// skipped; later assignments win.
class Config {
 public:
  static Config parse(std::istream& in);
  static Config read(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Values from `other` replace ours.
  void override_with(const Config& other);
  bool has(std::string_view key) const { return values_.count(std::string(key)) > 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string get(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;

  /// Throws Error(InvalidArgument) naming the first key outside `known`.
  void require_known(const std::set<std::string, std::less<>>& known) const;

  void write(std::ostream& out) const;
  void write(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
};

TraceConfig trace_config_from(const Config& c);
GnnHyper gnn_hyper_from(const Config& c);
BaselineHyper baseline_hyper_from(const Config& c, BackboneKind backbone);
TrainConfig train_config_from(const Config& c, ModelKind kind);

/// Every key understood by the model, trainer and synthetic-trace readers.
const std::set<std::string, std::less<>>& known_config_keys();

}  // namespace nfcast

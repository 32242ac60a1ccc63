#include "nfcast/config.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "nfcast/error.hpp"
#include "nfcast/format.hpp"

namespace nfcast {

namespace {
std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}
}  // namespace

Config Config::parse(std::istream& in) {
  Config c;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(n) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(n) + ": empty key");
    c.values_[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return c;
}

Config Config::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  return parse(in);
}

void Config::override_with(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string Config::get(std::string_view key, std::string fallback) const {
  const auto it = values_.find(std::string(key));
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(std::string_view key, double fallback) const {
  const auto it = values_.find(std::string(key));
  return it == values_.end() ? fallback : parse_number<double>(it->second, key);
}

std::size_t Config::get_size(std::string_view key, std::size_t fallback) const {
  const auto it = values_.find(std::string(key));
  return it == values_.end() ? fallback : parse_number<std::size_t>(it->second, key);
}

std::uint64_t Config::get_u64(std::string_view key, std::uint64_t fallback) const {
  const auto it = values_.find(std::string(key));
  return it == values_.end() ? fallback : parse_number<std::uint64_t>(it->second, key);
}

void Config::require_known(const std::set<std::string, std::less<>>& known) const {
  for (const auto& [k, v] : values_) {
    if (!known.count(k)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + k + "'");
  }
}

void Config::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
}

void Config::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write(out);
}

TraceConfig trace_config_from(const Config& c) {
  TraceConfig t;
  t.n_flows = c.get_size("n_flows", t.n_flows);
  t.n_heavy_ips = c.get_size("n_heavy_ips", t.n_heavy_ips);
  t.n_background_ips = c.get_size("n_background_ips", t.n_background_ips);
  t.heavy_talker_weight = c.get_double("heavy_talker_weight", t.heavy_talker_weight);
  t.seed = c.get_u64("trace_seed", t.seed);
  t.roster_size = c.get_size("roster_size", t.roster_size);
  t.churn = c.get_double("churn", t.churn);
  t.validate();
  return t;
}

GnnHyper gnn_hyper_from(const Config& c) {
  GnnHyper h;
  h.hidden_dim = c.get_size("hidden_dim", h.hidden_dim);
  h.latent_dim = c.get_size("latent_dim", h.latent_dim);
  h.n_layers = c.get_size("n_layers", h.n_layers);
  h.mask_ratio = c.get_double("mask_ratio", h.mask_ratio);
  h.edge_drop_p = c.get_double("edge_drop_p", h.edge_drop_p);
  h.alpha = c.get_double("alpha", h.alpha);
  h.dropout_p = c.get_double("dropout_p", h.dropout_p);
  h.learning_rate = c.get_double("learning_rate", h.learning_rate);
  h.validate();
  return h;
}

BaselineHyper baseline_hyper_from(const Config& c, BackboneKind backbone) {
  BaselineHyper h;
  h.backbone = backbone;
  h.octet_dim = c.get_size("octet_dim", h.octet_dim);
  h.category_dim = c.get_size("category_dim", h.category_dim);
  h.hidden_dim = c.get_size("hidden_dim", h.hidden_dim);
  h.kernel = c.get_size("kernel", h.kernel);
  h.mask_ratio = c.get_double("mask_ratio", h.mask_ratio);
  h.alpha = c.get_double("alpha", h.alpha);
  h.dropout_p = c.get_double("dropout_p", h.dropout_p);
  h.learning_rate = c.get_double("learning_rate", h.learning_rate);
  h.validate();
  return h;
}

TrainConfig train_config_from(const Config& c, ModelKind kind) {
  TrainConfig t = TrainConfig::for_model(kind);
  t.epochs = c.get_size("epochs", t.epochs);
  t.batch_size = c.get_size("batch_size", t.batch_size);
  t.grad_accumulation = c.get_size("grad_accumulation", t.grad_accumulation);
  t.seed = c.get_u64("seed", t.seed);
  t.validate();
  return t;
}

const std::set<std::string, std::less<>>& known_config_keys() {
  static const std::set<std::string, std::less<>> keys{
      "n_flows", "n_heavy_ips", "n_background_ips", "heavy_talker_weight", "trace_seed", "roster_size", "churn",
      "hidden_dim", "latent_dim", "n_layers", "mask_ratio", "edge_drop_p", "alpha", "dropout_p", "learning_rate",
      "octet_dim", "category_dim", "kernel", "epochs", "batch_size", "grad_accumulation", "seed", "model"};
  return keys;
}

}  // namespace nfcast

#include "nfcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "nfcast/error.hpp"
#include "nfcast/format.hpp"

namespace nfcast {

namespace {

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

void check_classes(std::span<const std::uint32_t> ids, std::size_t n_classes) {
  for (auto c : ids) {
    if (c >= n_classes) throw Error(ErrorKind::ClassOutOfRange, "class " + std::to_string(c));
  }
}

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> target) {
  check_same(pred.size(), target.size(), "mae");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double mse(std::span<const double> pred, std::span<const double> target) {
  check_same(pred.size(), target.size(), "mse");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double mae(const Matrix& pred, const Matrix& target) {
  check_same(pred.rows, target.rows, "mae rows");
  check_same(pred.cols, target.cols, "mae cols");
  return mae(std::span<const double>(pred.data), std::span<const double>(target.data));
}

double mse(const Matrix& pred, const Matrix& target) {
  check_same(pred.rows, target.rows, "mse rows");
  check_same(pred.cols, target.cols, "mse cols");
  return mse(std::span<const double>(pred.data), std::span<const double>(target.data));
}

double macro_accuracy(std::span<const std::uint32_t> preds, std::span<const std::uint32_t> targets,
                      std::size_t n_classes) {
  check_same(preds.size(), targets.size(), "macro_accuracy");
  check_classes(preds, n_classes);
  check_classes(targets, n_classes);
  std::vector<std::size_t> support(n_classes, 0), hits(n_classes, 0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ++support[targets[i]];
    if (preds[i] == targets[i]) ++hits[targets[i]];
  }
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (support[c] == 0) continue;
    total += static_cast<double>(hits[c]) / static_cast<double>(support[c]);
    ++present;
  }
  return present == 0 ? 0.0 : total / static_cast<double>(present);
}

double macro_precision(std::span<const std::uint32_t> preds, std::span<const std::uint32_t> targets,
                       std::size_t n_classes) {
  check_same(preds.size(), targets.size(), "macro_precision");
  check_classes(preds, n_classes);
  check_classes(targets, n_classes);
  std::vector<std::size_t> support(n_classes, 0), predicted(n_classes, 0), hits(n_classes, 0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ++support[targets[i]];
    ++predicted[preds[i]];
    if (preds[i] == targets[i]) ++hits[preds[i]];
  }
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (support[c] == 0) continue;
    if (predicted[c] > 0) total += static_cast<double>(hits[c]) / static_cast<double>(predicted[c]);
    ++present;
  }
  return present == 0 ? 0.0 : total / static_cast<double>(present);
}

double macro_auroc(const Matrix& scores, std::span<const std::uint32_t> targets) {
  check_same(scores.rows, targets.size(), "macro_auroc");
  check_classes(targets, scores.cols);
  std::vector<std::size_t> support(scores.cols, 0);
  for (auto t : targets) ++support[t];
  const std::size_t n = targets.size();
  std::vector<double> column(n);
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < scores.cols; ++c) {
    const std::size_t pos = support[c];
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) continue;
    for (std::size_t i = 0; i < n; ++i) column[i] = scores(i, c);
    const auto ranks = average_ranks(column);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (targets[i] == c) rank_sum += ranks[i];
    }
    const double p = static_cast<double>(pos);
    total += (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
    ++defined;
  }
  if (defined == 0) throw Error(ErrorKind::Degenerate, "no class has both positives and negatives");
  return total / static_cast<double>(defined);
}

double compound_score(double accuracy, double auroc, double mae) {
  const double clipped = std::clamp(mae, 0.0, 1.0);
  return 0.25 * accuracy + 0.25 * auroc + 0.5 * (1.0 - clipped);
}

std::uint64_t DegreeTable::actual_total() const noexcept {
  std::uint64_t s = 0;
  for (const auto& r : rows) s += r.actual;
  return s;
}

std::uint64_t DegreeTable::predicted_total() const noexcept {
  std::uint64_t s = 0;
  for (const auto& r : rows) s += r.predicted;
  return s;
}

namespace {
std::vector<std::uint32_t> top_by(const std::vector<DegreeRow>& rows, std::size_t k,
                                  std::uint64_t DegreeRow::*field) {
  std::vector<DegreeRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), [&](const DegreeRow& a, const DegreeRow& b) {
    if (a.*field != b.*field) return a.*field > b.*field;
    return a.node_id < b.node_id;
  });
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < std::min(k, sorted.size()); ++i) out.push_back(sorted[i].node_id);
  return out;
}
}  // namespace

std::vector<std::uint32_t> DegreeTable::top_predicted(std::size_t k) const {
  return top_by(rows, k, &DegreeRow::predicted);
}

std::vector<std::uint32_t> DegreeTable::top_actual(std::size_t k) const { return top_by(rows, k, &DegreeRow::actual); }

DegreeTable make_degree_table(std::span<const std::uint64_t> actual, std::span<const std::uint64_t> predicted) {
  check_same(actual.size(), predicted.size(), "degree table");
  DegreeTable t;
  t.rows.reserve(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    t.rows.push_back({static_cast<std::uint32_t>(i), actual[i], predicted[i]});
  }
  std::stable_sort(t.rows.begin(), t.rows.end(), [](const DegreeRow& a, const DegreeRow& b) {
    if (a.actual != b.actual) return a.actual > b.actual;
    return a.node_id < b.node_id;
  });
  return t;
}

void write_degree_csv(std::ostream& out, const DegreeTable& table) {
  out << "rank,node_id,actual_degree,predicted_degree\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    out << (i + 1) << ',' << r.node_id << ',' << r.actual << ',' << r.predicted << '\n';
  }
}

DegreeCounts::DegreeCounts(std::size_t n_ip_classes) {
  for (auto r : kAllRelations) {
    const std::size_t n = targets_ip(r) ? n_ip_classes : kPortNodes;
    actual[index(r)].assign(n, 0);
    predicted[index(r)].assign(n, 0);
  }
}

void DegreeCounts::add(const StructuralTargets& targets,
                       const std::array<std::vector<std::uint32_t>, kRelations>& attachments) {
  for (std::size_t r = 0; r < kRelations; ++r) {
    check_same(targets.classes[r].size(), attachments[r].size(), "degree counts");
    check_classes(targets.classes[r], actual[r].size());
    check_classes(attachments[r], predicted[r].size());
    for (auto c : targets.classes[r]) ++actual[r][c];
    for (auto c : attachments[r]) ++predicted[r][c];
  }
}

void DegreeCounts::merge(const DegreeCounts& other) {
  for (std::size_t r = 0; r < kRelations; ++r) {
    check_same(actual[r].size(), other.actual[r].size(), "degree merge");
    for (std::size_t i = 0; i < actual[r].size(); ++i) {
      actual[r][i] += other.actual[r][i];
      predicted[r][i] += other.predicted[r][i];
    }
  }
}

DegreeTable DegreeCounts::relation_table(Relation r) const {
  return make_degree_table(actual[index(r)], predicted[index(r)]);
}

namespace {
DegreeTable summed(const DegreeCounts& d, Relation a, Relation b) {
  std::vector<std::uint64_t> act = d.actual[index(a)], pred = d.predicted[index(a)];
  for (std::size_t i = 0; i < act.size(); ++i) {
    act[i] += d.actual[index(b)][i];
    pred[i] += d.predicted[index(b)][i];
  }
  return make_degree_table(act, pred);
}
}  // namespace

DegreeTable DegreeCounts::ip_table() const { return summed(*this, Relation::SrcIp, Relation::DstIp); }
DegreeTable DegreeCounts::port_table() const { return summed(*this, Relation::SrcPort, Relation::DstPort); }

DegreeCounts degree_rank(const StructuralTargets& actual,
                         const std::array<std::vector<std::uint32_t>, kRelations>& attachments,
                         std::size_t n_ip_classes) {
  DegreeCounts d(n_ip_classes);
  d.add(actual, attachments);
  return d;
}

MetricsAccumulator::MetricsAccumulator(std::size_t n_ip_classes, std::size_t numeric_width)
    : n_ip_classes_(n_ip_classes), numeric_width_(numeric_width), degrees_(n_ip_classes) {}

void MetricsAccumulator::add_features(const Matrix& predicted, const Matrix& actual) {
  check_same(predicted.rows, actual.rows, "feature rows");
  if (predicted.cols < numeric_width_ || actual.cols < numeric_width_) {
    throw Error(ErrorKind::ShapeMismatch, "feature matrix narrower than the numeric width");
  }
  for (std::size_t i = 0; i < predicted.rows; ++i) {
    for (std::size_t j = 0; j < numeric_width_; ++j) {
      const double e = predicted(i, j) - actual(i, j);
      abs_sum_ += std::abs(e);
      sq_sum_ += e * e;
    }
  }
  count_ += predicted.rows * numeric_width_;
}

void MetricsAccumulator::add_structure(const StructuralTargets& targets,
                                       const std::array<Matrix, kRelations>& probabilities,
                                       const std::array<std::vector<std::uint32_t>, kRelations>& attachments) {
  degrees_.add(targets, attachments);
  for (std::size_t r = 0; r < kRelations; ++r) {
    const std::size_t width = degrees_.actual[r].size();
    check_same(probabilities[r].cols, width, "probability width");
    check_same(probabilities[r].rows, targets.classes[r].size(), "probability rows");
    targets_[r].insert(targets_[r].end(), targets.classes[r].begin(), targets.classes[r].end());
    preds_[r].insert(preds_[r].end(), attachments[r].begin(), attachments[r].end());
    scores_[r].insert(scores_[r].end(), probabilities[r].data.begin(), probabilities[r].data.end());
  }
}

void MetricsAccumulator::merge(const MetricsAccumulator& other) {
  check_same(n_ip_classes_, other.n_ip_classes_, "accumulator classes");
  pairs_ += other.pairs_;
  abs_sum_ += other.abs_sum_;
  sq_sum_ += other.sq_sum_;
  count_ += other.count_;
  for (std::size_t r = 0; r < kRelations; ++r) {
    targets_[r].insert(targets_[r].end(), other.targets_[r].begin(), other.targets_[r].end());
    preds_[r].insert(preds_[r].end(), other.preds_[r].begin(), other.preds_[r].end());
    scores_[r].insert(scores_[r].end(), other.scores_[r].begin(), other.scores_[r].end());
  }
  degrees_.merge(other.degrees_);
}

std::string_view relation_name(Relation r) noexcept {
  switch (r) {
    case Relation::SrcIp: return "src_ip";
    case Relation::DstIp: return "dst_ip";
    case Relation::SrcPort: return "src_port";
    case Relation::DstPort: return "dst_port";
  }
  return "?";
}

MetricsReport finalize(const MetricsAccumulator& acc, std::string model) {
  MetricsReport rep;
  rep.model = std::move(model);
  rep.pairs = acc.pairs();
  if (acc.feature_count() > 0) {
    rep.mae = acc.abs_error_sum() / static_cast<double>(acc.feature_count());
    rep.mse = acc.sq_error_sum() / static_cast<double>(acc.feature_count());
  }
  double acc_sum = 0.0, prec_sum = 0.0, auroc_sum = 0.0;
  std::size_t auroc_n = 0;
  for (auto r : kAllRelations) {
    const std::size_t k = index(r);
    const std::size_t width = acc.degrees().actual[k].size();
    RelationMetrics& m = rep.per_relation[k];
    if (!acc.targets()[k].empty()) {
      m.accuracy = macro_accuracy(acc.predictions()[k], acc.targets()[k], width);
      m.precision = macro_precision(acc.predictions()[k], acc.targets()[k], width);
      Matrix scores(acc.targets()[k].size(), width);
      scores.data = acc.scores()[k];
      try {
        m.auroc = macro_auroc(scores, acc.targets()[k]);
        m.auroc_defined = true;
        auroc_sum += m.auroc;
        ++auroc_n;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Degenerate) throw;
      }
    }
    acc_sum += m.accuracy;
    prec_sum += m.precision;
    rep.relation_degrees[k] = acc.degrees().relation_table(r);
  }
  rep.macro_accuracy = acc_sum / static_cast<double>(kRelations);
  rep.macro_precision = prec_sum / static_cast<double>(kRelations);
  rep.macro_auroc = auroc_n == 0 ? 0.5 : auroc_sum / static_cast<double>(auroc_n);
  rep.compound_score = compound_score(rep.macro_accuracy, rep.macro_auroc, rep.mae);
  rep.ip_degrees = acc.degrees().ip_table();
  rep.port_degrees = acc.degrees().port_table();
  return rep;
}

void MetricsReport::write(std::ostream& out) const {
  out << "model=" << model << '\n';
  out << "pairs=" << pairs << '\n';
  out << "mae=" << format_double(mae) << '\n';
  out << "mse=" << format_double(mse) << '\n';
  out << "macro_accuracy=" << format_double(macro_accuracy) << '\n';
  out << "macro_auroc=" << format_double(macro_auroc) << '\n';
  out << "macro_precision=" << format_double(macro_precision) << '\n';
  out << "compound_score=" << format_double(compound_score) << '\n';
  for (auto r : kAllRelations) {
    const auto& m = per_relation[index(r)];
    const std::string p(relation_name(r));
    out << p << ".accuracy=" << format_double(m.accuracy) << '\n';
    out << p << ".auroc=" << (m.auroc_defined ? format_double(m.auroc) : std::string("undefined")) << '\n';
    out << p << ".precision=" << format_double(m.precision) << '\n';
  }
}

MetricsReport MetricsReport::read(std::istream& in) {
  MetricsReport rep;
  std::string line;
  auto number = [](const std::string& v, const std::string& key) { return parse_number<double>(v, key); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Corrupt, "report line without '=': " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "model") rep.model = value;
    else if (key == "pairs") rep.pairs = parse_number<std::size_t>(value, key);
    else if (key == "mae") rep.mae = number(value, key);
    else if (key == "mse") rep.mse = number(value, key);
    else if (key == "macro_accuracy") rep.macro_accuracy = number(value, key);
    else if (key == "macro_auroc") rep.macro_auroc = number(value, key);
    else if (key == "macro_precision") rep.macro_precision = number(value, key);
    else if (key == "compound_score") rep.compound_score = number(value, key);
    else {
      for (auto r : kAllRelations) {
        const std::string p = std::string(relation_name(r)) + ".";
        if (key.rfind(p, 0) != 0) continue;
        auto& m = rep.per_relation[index(r)];
        const std::string field = key.substr(p.size());
        if (field == "accuracy") m.accuracy = number(value, key);
        else if (field == "precision") m.precision = number(value, key);
        else if (field == "auroc" && value != "undefined") {
          m.auroc = number(value, key);
          m.auroc_defined = true;
        }
      }
    }
  }
  return rep;
}

}  // namespace nfcast

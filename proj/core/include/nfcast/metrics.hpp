#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nfcast/graph.hpp"
#include "nfcast/matrix.hpp"

namespace nfcast {

/// Mean absolute / squared error over all entries. Throws Error(ShapeMismatch).
double mae(std::span<const double> pred, std::span<const double> target);
double mse(std::span<const double> pred, std::span<const double> target);
double mae(const Matrix& pred, const Matrix& target);
double mse(const Matrix& pred, const Matrix& target);

/// Per-class recall averaged over the classes present in targets.
double macro_accuracy(std::span<const std::uint32_t> preds, std::span<const std::uint32_t> targets,
                      std::size_t n_classes);
/// Per-class precision averaged over the classes present in targets; a class
/// that is never predicted contributes 0.
double macro_precision(std::span<const std::uint32_t> preds, std::span<const std::uint32_t> targets,
                       std::size_t n_classes);
/// One-vs-rest AUROC per class (Mann-Whitney with average ranks for ties),
/// averaged over classes having both positives and negatives. One score row
/// per sample, one column per class. Throws Error(Degenerate) when no class
/// qualifies.
double macro_auroc(const Matrix& scores, std::span<const std::uint32_t> targets);

/// 0.25 acc + 0.25 auroc + 0.5 (1 - mae), mae clipped to [0, 1] first.
double compound_score(double accuracy, double auroc, double mae);

struct DegreeRow {
  std::uint32_t node_id = 0;
  std::uint64_t actual = 0;
  std::uint64_t predicted = 0;
};

/// Rows sorted by actual degree descending, ties by node id.
struct DegreeTable {
  std::vector<DegreeRow> rows;

  std::uint64_t actual_total() const noexcept;
  std::uint64_t predicted_total() const noexcept;
  /// Node ids of the k largest predicted degrees (ties by node id).
  std::vector<std::uint32_t> top_predicted(std::size_t k) const;
  std::vector<std::uint32_t> top_actual(std::size_t k) const;
};

DegreeTable make_degree_table(std::span<const std::uint64_t> actual, std::span<const std::uint64_t> predicted);
void write_degree_csv(std::ostream& out, const DegreeTable& table);

/// Degree counts per relation, indexed by node id (vocabulary id for IP
/// relations, port category for port relations).
struct DegreeCounts {
  std::array<std::vector<std::uint64_t>, kRelations> actual;
  std::array<std::vector<std::uint64_t>, kRelations> predicted;

  DegreeCounts() = default;
  explicit DegreeCounts(std::size_t n_ip_classes);

  void add(const StructuralTargets& targets, const std::array<std::vector<std::uint32_t>, kRelations>& attachments);
  void merge(const DegreeCounts& other);

  DegreeTable relation_table(Relation r) const;
  /// Source and destination relations summed: a node's degree over both ends.
  DegreeTable ip_table() const;
  DegreeTable port_table() const;
};

/// Tables for a single forecast: every connection counts once per relation.
DegreeCounts degree_rank(const StructuralTargets& actual,
                         const std::array<std::vector<std::uint32_t>, kRelations>& attachments,
                         std::size_t n_ip_classes);

struct RelationMetrics {
  double accuracy = 0.0;
  double auroc = 0.5;
  double precision = 0.0;
  bool auroc_defined = false;
};

/// Associative accumulator for one evaluation run. Feature errors cover the
/// first `numeric_width` columns of each prediction.
class MetricsAccumulator {
 public:
  MetricsAccumulator(std::size_t n_ip_classes, std::size_t numeric_width);

  void add_features(const Matrix& predicted, const Matrix& actual);
  void add_structure(const StructuralTargets& targets, const std::array<Matrix, kRelations>& probabilities,
                     const std::array<std::vector<std::uint32_t>, kRelations>& attachments);
  void merge(const MetricsAccumulator& other);

  std::size_t n_ip_classes() const noexcept { return n_ip_classes_; }
  std::size_t pairs() const noexcept { return pairs_; }
  void count_pair() noexcept { ++pairs_; }

  const DegreeCounts& degrees() const noexcept { return degrees_; }
  double abs_error_sum() const noexcept { return abs_sum_; }
  double sq_error_sum() const noexcept { return sq_sum_; }
  std::size_t feature_count() const noexcept { return count_; }
  const std::array<std::vector<std::uint32_t>, kRelations>& targets() const noexcept { return targets_; }
  const std::array<std::vector<std::uint32_t>, kRelations>& predictions() const noexcept { return preds_; }
  const std::array<std::vector<double>, kRelations>& scores() const noexcept { return scores_; }

 private:
  std::size_t n_ip_classes_;
  std::size_t numeric_width_;
  std::size_t pairs_ = 0;
  double abs_sum_ = 0.0;
  double sq_sum_ = 0.0;
  std::size_t count_ = 0;
  std::array<std::vector<std::uint32_t>, kRelations> targets_;
  std::array<std::vector<std::uint32_t>, kRelations> preds_;
  std::array<std::vector<double>, kRelations> scores_;  // row-major probability rows
  DegreeCounts degrees_;
};

struct MetricsReport {
  std::string model;
  std::size_t pairs = 0;
  double mae = 0.0;
  double mse = 0.0;
  double macro_accuracy = 0.0;
  double macro_auroc = 0.5;
  double macro_precision = 0.0;
  double compound_score = 0.0;
  std::array<RelationMetrics, kRelations> per_relation;
  std::array<DegreeTable, kRelations> relation_degrees;
  DegreeTable ip_degrees;
  DegreeTable port_degrees;

  /// Flat key=value lines; doubles printed in shortest round-trip form.
  void write(std::ostream& out) const;
  /// Reads the scalar fields written by write(); degree tables stay empty.
  static MetricsReport read(std::istream& in);
};

/// Structural metrics per relation then averaged; relations whose AUROC is
/// undefined are left out of the AUROC mean (0.5 if none is defined).
MetricsReport finalize(const MetricsAccumulator& acc, std::string model);

std::string_view relation_name(Relation r) noexcept;

}  // namespace nfcast

#include <doctest.h>

#include <sstream>

#include "nfcast/error.hpp"
#include "nfcast/metrics.hpp"
#include "nfcast/rng.hpp"

using namespace nfcast;

TEST_CASE("feature errors") {
  const std::vector<double> t{1, 2, 3, 4};
  CHECK(mae(t, t) == 0.0);
  CHECK(mse(t, t) == 0.0);
  const std::vector<double> p{1.1, 2.1, 3.1, 4.1};
  CHECK(mae(p, t) == doctest::Approx(0.1));
  CHECK(mse(p, t) == doctest::Approx(0.01));
  CHECK_THROWS_AS(mae(p, std::vector<double>{1}), Error);
  Matrix a(2, 2), b(2, 3);
  CHECK_THROWS_AS(mse(a, b), Error);

  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(10), y(10);
    for (std::size_t i = 0; i < 10; ++i) {
      x[i] = rng.uniform(-1, 1);
      y[i] = x[i] + rng.uniform(-1, 1);
    }
    CHECK(mse(x, y) <= mae(x, y));
  }
}

TEST_CASE("macro accuracy and precision") {
  const std::vector<std::uint32_t> perfect{0, 1, 2, 2};
  CHECK(macro_accuracy(perfect, perfect, 3) == 1.0);
  CHECK(macro_precision(perfect, perfect, 3) == 1.0);
  const std::vector<std::uint32_t> always0{0, 0, 0, 0}, balanced{0, 0, 1, 1};
  CHECK(macro_accuracy(always0, balanced, 2) == 0.5);
  const std::vector<std::uint32_t> single{2, 2, 2};
  CHECK(macro_accuracy(single, single, 5) == 1.0);
  CHECK_THROWS_AS(macro_accuracy(always0, single, 3), Error);
}

TEST_CASE("macro AUROC") {
  Matrix separating(4, 2);
  separating.data = {0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.1, 0.9};
  const std::vector<std::uint32_t> y{0, 0, 1, 1};
  CHECK(macro_auroc(separating, y) == 1.0);

  Matrix flat(4, 2, 0.5);
  CHECK(macro_auroc(flat, y) == 0.5);

  // Class 0: positives {0.9, 0.4}, negatives {0.5, 0.4}: pairs 1 + 1 + 0 + 0.5 = 2.5 / 4.
  // Class 1 mirrors it with scores 1 - s, giving the same value.
  Matrix hand(4, 2);
  hand.data = {0.9, 0.1, 0.4, 0.6, 0.5, 0.5, 0.4, 0.6};
  CHECK(macro_auroc(hand, y) == doctest::Approx(0.625));

  const std::vector<std::uint32_t> one_class{1, 1, 1, 1};
  CHECK_THROWS_AS(macro_auroc(flat, one_class), Error);
}

TEST_CASE("compound score") {
  CHECK(compound_score(1, 1, 0) == 1.0);
  CHECK(compound_score(0, 0, 1) == 0.0);
  CHECK(compound_score(0.879, 0.951, 0.0647) == doctest::Approx(0.92515).epsilon(1e-9));
  CHECK(compound_score(1, 1, 5.0) == 0.5);
  CHECK(compound_score(0, 0, -1.0) == 0.5);
}

TEST_CASE("degree tables") {
  // Every connection on IP 2: its degree over both ends is 2L.
  StructuralTargets t;
  std::array<std::vector<std::uint32_t>, kRelations> pred;
  const std::size_t L = 10;
  for (std::size_t r = 0; r < kRelations; ++r) {
    t.classes[r].assign(L, r < 2 ? 2 : 3);
    pred[r].assign(L, r < 2 ? 1 : 4);
  }
  const auto d = degree_rank(t, pred, 4);
  const auto ip = d.ip_table();
  CHECK(ip.rows.front().node_id == 2);
  CHECK(ip.rows.front().actual == 2 * L);
  CHECK(ip.actual_total() == 2 * L);
  for (auto r : kAllRelations) {
    CHECK(d.relation_table(r).actual_total() == L);
    CHECK(d.relation_table(r).predicted_total() == L);
  }
  CHECK(ip.top_predicted(1) == std::vector<std::uint32_t>{1});

  // Hand count on a 10-connection toy.
  StructuralTargets h;
  h.classes[0] = {1, 1, 2, 3, 1, 2, 1, 3, 3, 1};
  h.classes[1] = {2, 2, 2, 2, 2, 1, 1, 1, 3, 3};
  h.classes[2] = {6, 6, 6, 6, 6, 6, 6, 6, 6, 6};
  h.classes[3] = {3, 3, 1, 4, 4, 4, 3, 0, 2, 3};
  std::array<std::vector<std::uint32_t>, kRelations> hp{h.classes[1], h.classes[0], h.classes[2], h.classes[3]};
  const auto hd = degree_rank(h, hp, 4);
  const auto src = hd.relation_table(Relation::SrcIp);
  // Source degrees: id1 5, id3 3, id2 2, id0 0.
  REQUIRE(src.rows.size() == 4);
  CHECK(src.rows[0].node_id == 1);
  CHECK(src.rows[0].actual == 5);
  CHECK(src.rows[1].node_id == 3);
  CHECK(src.rows[1].actual == 3);
  CHECK(src.rows[2].node_id == 2);
  CHECK(src.rows[2].actual == 2);
  CHECK(src.rows[3].actual == 0);
  // Predicted source = actual destination: id2 5, id1 3, id3 2.
  CHECK(src.rows[0].predicted == 3);
  CHECK(src.rows[2].predicted == 5);
  const auto port = hd.relation_table(Relation::DstPort);
  CHECK(port.rows.size() == kPortNodes);
  CHECK(port.rows[0].node_id == 3);
  CHECK(port.rows[0].actual == 4);

  std::ostringstream csv;
  write_degree_csv(csv, src);
  CHECK(csv.str() == "rank,node_id,actual_degree,predicted_degree\n1,1,5,3\n2,3,3,2\n3,2,2,5\n4,0,0,0\n");
}

TEST_CASE("accumulator is order independent and consistent") {
  Rng rng(9);
  const std::size_t n_ip = 5;
  auto random_batch = [&](std::size_t L) {
    StructuralTargets t;
    std::array<Matrix, kRelations> probs;
    std::array<std::vector<std::uint32_t>, kRelations> att;
    for (std::size_t r = 0; r < kRelations; ++r) {
      const std::size_t k = r < 2 ? n_ip : kPortNodes;
      probs[r] = Matrix(L, k);
      for (std::size_t i = 0; i < L; ++i) {
        t.classes[r].push_back(static_cast<std::uint32_t>(rng.uniform_int(k)));
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += probs[r](i, j) = rng.uniform();
        std::uint32_t best = 0;
        for (std::size_t j = 0; j < k; ++j) {
          probs[r](i, j) /= z;
          if (probs[r](i, j) > probs[r](i, best)) best = static_cast<std::uint32_t>(j);
        }
        att[r].push_back(best);
      }
    }
    Matrix pred(L, 9), actual(L, 9);
    for (auto& v : pred.data) v = rng.uniform();
    for (auto& v : actual.data) v = rng.uniform();
    return std::tuple{t, probs, att, pred, actual};
  };
  const auto b1 = random_batch(12), b2 = random_batch(12);
  auto feed = [&](MetricsAccumulator& acc, const auto& b) {
    const auto& [t, p, a, pr, ac] = b;
    acc.add_features(pr, ac);
    acc.add_structure(t, p, a);
    acc.count_pair();
  };
  MetricsAccumulator forward(n_ip, 5), backward(n_ip, 5), left(n_ip, 5), right(n_ip, 5);
  feed(forward, b1);
  feed(forward, b2);
  feed(backward, b2);
  feed(backward, b1);
  feed(left, b1);
  feed(right, b2);
  left.merge(right);
  const auto r1 = finalize(forward, "gnn"), r2 = finalize(backward, "gnn"), r3 = finalize(left, "gnn");
  for (const auto* r : {&r2, &r3}) {
    CHECK(r->mae == doctest::Approx(r1.mae));
    CHECK(r->macro_accuracy == doctest::Approx(r1.macro_accuracy));
    CHECK(r->macro_auroc == doctest::Approx(r1.macro_auroc));
    CHECK(r->macro_precision == doctest::Approx(r1.macro_precision));
  }
  CHECK(r1.pairs == 2);
  CHECK(r1.compound_score == doctest::Approx(compound_score(r1.macro_accuracy, r1.macro_auroc, r1.mae)));
  CHECK(forward.feature_count() == 2 * 12 * 5);

  std::stringstream text;
  r1.write(text);
  const auto back = MetricsReport::read(text);
  CHECK(back.model == "gnn");
  CHECK(back.mae == r1.mae);
  CHECK(back.compound_score == r1.compound_score);
  CHECK(back.per_relation[2].auroc == r1.per_relation[2].auroc);
}

TEST_CASE("perfect predictions") {
  StructuralTargets t;
  std::array<Matrix, kRelations> probs;
  std::array<std::vector<std::uint32_t>, kRelations> att;
  for (std::size_t r = 0; r < kRelations; ++r) {
    const std::size_t k = r < 2 ? 3 : kPortNodes;
    t.classes[r] = {0, 1, 2, 1};
    att[r] = t.classes[r];
    probs[r] = Matrix(4, k);
    for (std::size_t i = 0; i < 4; ++i) probs[r](i, t.classes[r][i]) = 1.0;
  }
  MetricsAccumulator acc(3, 2);
  Matrix f(4, 6, 0.25);
  acc.add_features(f, f);
  acc.add_structure(t, probs, att);
  const auto r = finalize(acc, "oracle");
  CHECK(r.mae == 0.0);
  CHECK(r.macro_accuracy == 1.0);
  CHECK(r.macro_auroc == 1.0);
  CHECK(r.compound_score == 1.0);
}

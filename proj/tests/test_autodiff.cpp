#include <doctest.h>

#include <cmath>

#include "nfcast/autodiff.hpp"
#include "nfcast/error.hpp"
#include "support.hpp"

using namespace nfcast;
using ad::Shape;
using ad::Tensor;

TEST_CASE("forward values") {
  const Tensor a = Tensor::from(Shape::mat(2, 2), {1, 2, 3, 4});
  const Tensor eye = Tensor::from(Shape::mat(2, 2), {1, 0, 0, 1});
  CHECK(ad::matmul(a, eye).to_matrix().data == a.to_matrix().data);
  CHECK(ad::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ad::transpose(a).to_matrix().data == std::vector<double>{1, 3, 2, 4});

  const Tensor v = Tensor::from(Shape::mat(3, 1), {2, 4, 6});
  const std::vector<std::uint32_t> ids{0, 0, 1};
  CHECK(ad::segment_mean(v, ids, 2).to_matrix().data == std::vector<double>{3, 6});
  const std::vector<std::uint32_t> sparse{0, 0, 2};
  CHECK(ad::segment_mean(v, sparse, 3).to_matrix().data == std::vector<double>{3, 0, 6});

  const Tensor constant = Tensor::full(Shape::mat(6, 2), 1.5);
  CHECK(ad::moving_average(constant, 5).to_matrix().data == constant.to_matrix().data);
  const Tensor seq = Tensor::from(Shape::mat(5, 1), {1, 2, 3, 4, 10});
  // Edge replication: [1 1 2 3 4 10 10].
  const auto ma = ad::moving_average(seq, 3).to_matrix().data;
  const std::vector<double> expect{4.0 / 3, 2, 3, 17.0 / 3, 8};
  for (std::size_t i = 0; i < 5; ++i) CHECK(ma[i] == doctest::Approx(expect[i]));
  CHECK_THROWS_AS(ad::moving_average(seq, 4), Error);
  CHECK_THROWS_AS(ad::moving_average(seq, 7), Error);

  const Tensor logits = Tensor::zeros(Shape::mat(3, 5));
  const std::vector<std::uint32_t> cls{0, 3, 4};
  CHECK(ad::softmax_cross_entropy(logits, cls).item() == doctest::Approx(std::log(5.0)));
  CHECK(ad::bce_with_logits(Tensor::zeros(Shape::mat(1, 2)), Tensor::from(Shape::mat(1, 2), {0, 1})).item() ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("broadcasting and shape errors") {
  const Tensor a = Tensor::from(Shape::mat(2, 2), {1, 2, 3, 4});
  CHECK(ad::add(a, Tensor::from(Shape::vec(2), {10, 20})).to_matrix().data == std::vector<double>{11, 22, 13, 24});
  CHECK(ad::mul(a, Tensor::scalar(2)).to_matrix().data == std::vector<double>{2, 4, 6, 8});
  CHECK_THROWS_AS(ad::matmul(a, Tensor::zeros(Shape::mat(3, 1))), Error);
  CHECK_THROWS_AS(ad::add(a, Tensor::zeros(Shape::mat(3, 2))), Error);
  CHECK_THROWS_AS(ad::reshape(a, Shape::mat(3, 1)), Error);
  const std::vector<std::uint32_t> bad{5};
  CHECK_THROWS_AS(ad::row_gather(a, bad), Error);
  CHECK_THROWS_AS(ad::backward(a), Error);
}

TEST_CASE("hand gradients") {
  Tensor x = Tensor::scalar(3.0, true);
  ad::backward(ad::mul(x, x));
  CHECK(x.grad()[0] == doctest::Approx(6.0));

  Tensor pred = Tensor::from(Shape::mat(2, 2), {1, 2, 3, 4}, true);
  ad::backward(ad::mse_loss(pred, pred.detach()));
  for (double g : pred.grad()) CHECK(g == 0.0);

  // Leaf gradients accumulate across backward calls.
  Tensor y = Tensor::scalar(2.0, true);
  ad::backward(ad::scale(y, 3.0));
  ad::backward(ad::scale(y, 3.0));
  CHECK(y.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("finite differences on composite expressions") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto w = testing::random_tensor(Shape::mat(4, 3), rng);
    auto b = testing::random_tensor(Shape::vec(3), rng);
    auto x = testing::random_tensor(Shape::mat(5, 4), rng, -1, 1, false);
    const std::vector<std::uint32_t> seg{0, 1, 1, 2, 0};
    const std::vector<std::uint32_t> cls{2, 0, 1};
    auto loss = [&] {
      auto h = ad::tanh(ad::add(ad::matmul(x, w), b));
      auto pooled = ad::segment_mean(h, seg, 3);
      return ad::add(ad::softmax_cross_entropy(pooled, cls), ad::mean(ad::mul(ad::sigmoid(h), h)));
    };
    const auto check = testing::grad_check({{"w", w}, {"b", b}}, loss, 1e-5);
    CHECK(check.max_rel_error < 1e-4);
  }
}

TEST_CASE("dropout") {
  Rng rng(1);
  const Tensor a = Tensor::full(Shape::mat(100, 100), 1.0);
  CHECK(ad::dropout(a, 0.0, rng).to_matrix().data == a.to_matrix().data);
  const auto d = ad::dropout(a, 0.5, rng).to_matrix().data;
  double total = 0.0;
  for (double v : d) {
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
    total += v;
  }
  CHECK(total / static_cast<double>(d.size()) == doctest::Approx(1.0).epsilon(0.05));
}

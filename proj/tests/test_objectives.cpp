#include <cmath>
#include <numbers>

#include "doctest.h"
#include "segzsl/adam.hpp"
#include "segzsl/error.hpp"
#include "segzsl/objectives.hpp"
#include "segzsl/rng.hpp"
#include "test_util.hpp"

using namespace segzsl;
using segzsl::test::close_rel;
using segzsl::test::random_tensor;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

AttributeBank tiny_bank(std::uint64_t seed, std::size_t classes = 4,
                        std::size_t attr_dim = 3) {
  RngStream rng(seed);
  Tensor attrs({classes, attr_dim});
  for (std::size_t i = 0; i < attrs.numel(); ++i) {
    attrs[i] = static_cast<double>(rng.uniform_int(2));
  }
  std::vector<int> seen, unseen;
  for (std::size_t c = 0; c < classes; ++c) {
    if (c < classes / 2) {
      seen.push_back(static_cast<int>(c));
    } else {
      unseen.push_back(static_cast<int>(c));
    }
  }
  return AttributeBank(std::move(attrs), std::move(seen), std::move(unseen));
}

Batch tiny_batch(const Dims& dims, std::uint64_t seed, std::size_t rows = 4) {
  RngStream rng(seed);
  Batch b;
  b.x = random_tensor({rows, dims.feature_dim}, rng);
  b.attrs = random_tensor({rows, dims.attr_dim}, rng, 0.5);
  return b;
}

// Numeric quadrature of KL(p||q) for 1-D Gaussians over a wide trapezoid
// grid; the independent oracle for the closed form.
double kl_quadrature(double mp, double lp, double mq, double lq) {
  const double sp = std::exp(0.5 * lp);
  const double lo = mp - 14.0 * sp;
  const double hi = mp + 14.0 * sp;
  const std::size_t steps = 400000;
  const double dx = (hi - lo) / static_cast<double>(steps);
  auto log_pdf = [](double x, double mean, double logvar) {
    const double dev = x - mean;
    return -0.5 * (dev * dev / std::exp(logvar) + logvar + kLog2Pi);
  };
  double acc = 0.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double x = lo + dx * static_cast<double>(i);
    const double lpx = log_pdf(x, mp, lp);
    const double integrand = std::exp(lpx) * (lpx - log_pdf(x, mq, lq));
    acc += (i == 0 || i == steps) ? 0.5 * integrand : integrand;
  }
  return acc * dx;
}

}  // namespace

TEST_CASE("kl_diag_gauss closed-form cases") {
  GaussianDiag p, q;
  p.mean = Tensor({3}, {0.4, -1.0, 2.0});
  p.logvar = Tensor({3}, {0.2, -0.5, 0.0});
  q = p;
  CHECK(kl_diag_gauss(p, q) == doctest::Approx(0.0));

  // p = N(mu, I), q = N(0, I) -> ||mu||^2 / 2.
  p.logvar = Tensor({3});
  q.mean = Tensor({3});
  q.logvar = Tensor({3});
  const double norm2 = 0.4 * 0.4 + 1.0 + 4.0;
  CHECK(kl_diag_gauss(p, q) == doctest::Approx(norm2 / 2.0));

  q.mean = Tensor({2});
  q.logvar = Tensor({2});
  CHECK_THROWS_AS(kl_diag_gauss(p, q), Error);
}

TEST_CASE("kl_diag_gauss matches numeric quadrature") {
  RngStream rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    GaussianDiag p, q;
    p.mean = Tensor({1}, {rng.normal()});
    p.logvar = Tensor({1}, {0.5 * rng.normal()});
    q.mean = Tensor({1}, {rng.normal()});
    q.logvar = Tensor({1}, {0.5 * rng.normal()});
    const double closed = kl_diag_gauss(p, q);
    const double numeric =
        kl_quadrature(p.mean[0], p.logvar[0], q.mean[0], q.logvar[0]);
    CHECK(std::fabs(closed - numeric) < 1e-6);
  }
}

TEST_CASE("property: kl nonnegative on 100 random pairs, zero iff equal") {
  RngStream rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.uniform_int(6);
    GaussianDiag p, q;
    p.mean = random_tensor({d}, rng);
    p.logvar = random_tensor({d}, rng, 0.6);
    q.mean = random_tensor({d}, rng);
    q.logvar = random_tensor({d}, rng, 0.6);
    CHECK(kl_diag_gauss(p, q) >= 0.0);
    CHECK(kl_diag_gauss(p, p) == doctest::Approx(0.0));
  }
}

TEST_CASE("loss_sup closed forms") {
  Dims dims = test::tiny_dims();
  ModelParams p = init_params(dims, 5);

  SUBCASE("perfect regressor gives zero") {
    // Zero weights + bias b: every prediction equals b; make targets b.
    for (Tensor* t : p.regressor.tensors()) *t = Tensor::zeros_like(*t);
    p.regressor.b_out = Tensor({3}, {0.5, -0.25, 1.0});
    Batch batch = tiny_batch(dims, 7);
    for (std::size_t i = 0; i < batch.attrs.rows(); ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        batch.attrs.at(i, j) = p.regressor.b_out[j];
      }
    }
    CHECK(loss_sup(p, batch).value == doctest::Approx(0.0));
  }

  SUBCASE("single pair with unit error gives 0.5") {
    for (Tensor* t : p.regressor.tensors()) *t = Tensor::zeros_like(*t);
    Batch batch;
    batch.x = Tensor({1, dims.feature_dim});
    batch.attrs = Tensor({1, dims.attr_dim});
    batch.attrs.at(0, 0) = -1.0;  // prediction 0, target -1 on one dim
    CHECK(loss_sup(p, batch).value == doctest::Approx(0.5));
  }

  SUBCASE("empty batch rejected") {
    Batch batch;
    batch.x = Tensor({0, dims.feature_dim});
    batch.attrs = Tensor({0, dims.attr_dim});
    CHECK_THROWS_AS(loss_sup(p, batch), Error);
  }

  SUBCASE("gradient matches finite differences") {
    Batch batch = tiny_batch(dims, 8);
    LossEval eval = loss_sup(p, batch);
    auto outcome = test::fd_check_model(
        p, eval.grads, [&](const ModelParams& q) {
          return loss_sup(q, batch).value;
        });
    CHECK(outcome.ok());
  }
}

TEST_CASE("loss_unsup routing and determinism") {
  Dims dims = test::tiny_dims();
  ModelParams p = init_params(dims, 15);
  AttributeBank bank = tiny_bank(16);

  SUBCASE("regressor gradient flows, generator and encoder stay zero") {
    RngStream rng(17);
    LossEval eval = loss_unsup(p, 8, bank, rng);
    CHECK(test::grads_any_nonzero(eval.grads.regressor));
    CHECK(test::grads_all_zero(eval.grads.generator));
    CHECK(test::grads_all_zero(eval.grads.encoder));
  }

  SUBCASE("identical seed gives identical value") {
    RngStream r1(21), r2(21);
    CHECK(loss_unsup(p, 8, bank, r1).value ==
          loss_unsup(p, 8, bank, r2).value);
  }

  SUBCASE("empty bank rejected") {
    RngStream rng(1);
    AttributeBank empty;
    CHECK_THROWS_AS(loss_unsup(p, 4, empty, rng), Error);
    CHECK_THROWS_AS(loss_unsup(p, 0, bank, rng), Error);
  }

  SUBCASE("regressor gradient matches finite differences") {
    RngStream rng(23);
    LossEval eval = loss_unsup(p, 6, bank, rng);
    // FD only on the regressor: the generator is a stop-gradient constant,
    // so the defined gradient there is zero even though the value moves.
    auto outcome = test::fd_check_model(
        p, eval.grads,
        [&](const ModelParams& q) {
          RngStream r(23);
          return loss_unsup(q, 6, bank, r).value;
        },
        test::GroupMask{false, false, true});
    CHECK(outcome.ok());
  }

  SUBCASE("perfect generator/regressor pair sits near the noise floor") {
    // Identity-style pair on D == L: the generator writes the attributes
    // through a positive-pass hidden layer with minimal output variance; the
    // regressor reconstructs its input through paired +/- units.
    const std::size_t d = 3;
    Dims sq{d, d, 2, 2 * d};
    ModelParams ident = init_params(sq, 1);
    for (Tensor* t : ident.generator.tensors()) *t = Tensor::zeros_like(*t);
    for (Tensor* t : ident.regressor.tensors()) *t = Tensor::zeros_like(*t);
    // Generator hidden unit j passes attribute j (attributes are >= 0).
    for (std::size_t j = 0; j < d; ++j) {
      ident.generator.w1.at(sq.latent_dim + j, j) = 1.0;
      ident.generator.w_mean.at(j, j) = 1.0;
    }
    ident.generator.b_logvar = Tensor::full({d}, -6.0);
    // Regressor: relu(x) - relu(-x) == x.
    for (std::size_t j = 0; j < d; ++j) {
      ident.regressor.w1.at(j, 2 * j) = 1.0;
      ident.regressor.w1.at(j, 2 * j + 1) = -1.0;
      ident.regressor.w_out.at(2 * j, j) = 1.0;
      ident.regressor.w_out.at(2 * j + 1, j) = -1.0;
    }
    AttributeBank bank_sq = tiny_bank(29, 4, d);
    RngStream rng(31);
    LossEval eval = loss_unsup(ident, 64, bank_sq, rng);
    // Residual is 0.5 * E||sigma * eps||^2 with sigma^2 = exp(-6).
    CHECK(eval.value < 0.01);
  }
}

TEST_CASE("loss_regressor_total combines terms") {
  Dims dims = test::tiny_dims();
  ModelParams p = init_params(dims, 35);
  AttributeBank bank = tiny_bank(36);
  Batch batch = tiny_batch(dims, 37);

  SUBCASE("lambda_r = 0 equals loss_sup") {
    LossWeights w;
    w.lambda_r = 0.0;
    RngStream rng(38);
    RegressorLossEval total =
        loss_regressor_total(p, batch, 6, bank, w, rng);
    CHECK(total.total == doctest::Approx(loss_sup(p, batch).value));
  }

  SUBCASE("lambda_r = 1 adds the two precomputed terms") {
    LossWeights w;
    w.lambda_r = 1.0;
    RngStream rng(39);
    RegressorLossEval total =
        loss_regressor_total(p, batch, 6, bank, w, rng);
    RngStream rng2(39);
    const double unsup = loss_unsup(p, 6, bank, rng2).value;
    const double sup = loss_sup(p, batch).value;
    CHECK(total.total == doctest::Approx(sup + unsup));
    CHECK(total.supervised == doctest::Approx(sup));
    CHECK(total.unsupervised == doctest::Approx(unsup));
  }

  SUBCASE("gradient matches finite differences") {
    LossWeights w;
    RngStream rng(40);
    RegressorLossEval total =
        loss_regressor_total(p, batch, 5, bank, w, rng);
    auto outcome = test::fd_check_model(
        p, total.grads,
        [&](const ModelParams& q) {
          RngStream r(40);
          return loss_regressor_total(q, batch, 5, bank, w, r).total;
        },
        test::GroupMask{false, false, true});
    CHECK(outcome.ok());
  }
}

TEST_CASE("loss_vae closed forms and gradients") {
  Dims dims = test::tiny_dims();

  SUBCASE("perfect autoencoder at the prior costs only the constant") {
    // Zero nets: encoder emits N(0, I) (zero KL); generator mean/logvar are
    // zero, so feeding x = 0 gives reconstruction NLL D*log(2pi)/2.
    ModelParams p = init_params(dims, 45);
    for (Tensor* t : p.encoder.tensors()) *t = Tensor::zeros_like(*t);
    for (Tensor* t : p.generator.tensors()) *t = Tensor::zeros_like(*t);
    Batch batch;
    batch.x = Tensor({2, dims.feature_dim});
    batch.attrs = Tensor({2, dims.attr_dim});
    RngStream rng(46);
    // eps draws do not matter: with logvar = 0 the sample shifts z, but the
    // generator ignores z only if its weights are zero, which they are.
    LossEval eval = loss_vae(p, batch, rng);
    CHECK(eval.value ==
          doctest::Approx(static_cast<double>(dims.feature_dim) * kLog2Pi /
                          2.0));
  }

  SUBCASE("gradient matches finite differences") {
    ModelParams p = init_params(dims, 47);
    Batch batch = tiny_batch(dims, 48);
    RngStream rng(49);
    LossEval eval = loss_vae(p, batch, rng);
    CHECK(test::grads_all_zero(eval.grads.regressor));
    auto outcome = test::fd_check_model(
        p, eval.grads, [&](const ModelParams& q) {
          RngStream r(49);
          return loss_vae(q, batch, r).value;
        });
    CHECK(outcome.ok());
  }
}

TEST_CASE("loss_cyclic_attr routing and agreement with loss_unsup") {
  Dims dims = test::tiny_dims();
  ModelParams p = init_params(dims, 55);
  AttributeBank bank = tiny_bank(56);

  SUBCASE("generator gradient flows, regressor stays zero") {
    RngStream rng(57);
    LossEval eval = loss_cyclic_attr(p, 8, bank, rng);
    CHECK(test::grads_any_nonzero(eval.grads.generator));
    CHECK(test::grads_all_zero(eval.grads.regressor));
  }

  SUBCASE("same seed gives the same value as loss_unsup") {
    RngStream r1(58), r2(58);
    CHECK(loss_cyclic_attr(p, 8, bank, r1).value ==
          doctest::Approx(loss_unsup(p, 8, bank, r2).value));
  }

  SUBCASE("gradient matches finite differences") {
    RngStream rng(59);
    LossEval eval = loss_cyclic_attr(p, 6, bank, rng);
    // The regressor is the stop-gradient side here.
    auto outcome = test::fd_check_model(
        p, eval.grads,
        [&](const ModelParams& q) {
          RngStream r(59);
          return loss_cyclic_attr(q, 6, bank, r).value;
        },
        test::GroupMask{false, true, false});
    CHECK(outcome.ok());
  }

  SUBCASE("minimizing L_c drives generated means toward the preimage") {
    // Fixed identity regressor on D == L (see loss_unsup test); training the
    // generator on L_c alone should pull generate(z, a).mean toward a.
    const std::size_t d = 3;
    Dims sq{d, d, 2, 2 * d};
    ModelParams m = init_params(sq, 61);
    for (Tensor* t : m.regressor.tensors()) *t = Tensor::zeros_like(*t);
    for (std::size_t j = 0; j < d; ++j) {
      m.regressor.w1.at(j, 2 * j) = 1.0;
      m.regressor.w1.at(j, 2 * j + 1) = -1.0;
      m.regressor.w_out.at(2 * j, j) = 1.0;
      m.regressor.w_out.at(2 * j + 1, j) = -1.0;
    }
    AttributeBank bank_sq = tiny_bank(62, 4, d);

    auto mean_error = [&](const ModelParams& params) {
      double err = 0.0;
      std::size_t count = 0;
      for (int cls = 0; cls < 4; ++cls) {
        Tensor a = bank_sq.row(cls);
        Tensor z({sq.latent_dim});  // evaluate at the prior mean
        GaussianDiag out = generate(params, z, a);
        for (std::size_t j = 0; j < d; ++j) {
          const double dev = out.mean[j] - a[j];
          err += dev * dev;
          ++count;
        }
      }
      return err / static_cast<double>(count);
    };

    const double before = mean_error(m);
    AdamConfig adam_cfg;
    adam_cfg.lr = 1e-2;
    std::vector<Tensor*> view = m.generator.tensors();
    std::vector<const Tensor*> cview(view.begin(), view.end());
    AdamState adam("generator", adam_cfg, cview);
    for (int step = 0; step < 400; ++step) {
      RngStream rng(900 + step);
      LossEval eval = loss_cyclic_attr(m, 16, bank_sq, rng);
      adam.step(view, eval.grads.generator);
    }
    const double after = mean_error(m);
    CHECK(after < 0.25 * before);
  }
}

TEST_CASE("loss_reg sharpness behavior") {
  Dims dims = test::tiny_dims();
  AttributeBank bank = tiny_bank(66);

  SUBCASE("zero logvar at eps = 0 gives D log(2pi) / 2") {
    // Mean mode is not exposed here, but eps = 0 is achievable with a zero
    // generator whose sample equals its mean.
    ModelParams p = init_params(dims, 65);
    for (Tensor* t : p.generator.tensors()) *t = Tensor::zeros_like(*t);
    RngStream rng(67);
    LossEval eval = loss_reg(p, 16, bank, rng);
    // With logvar = 0 the Mahalanobis term is eps^2; its expectation is 1
    // per dim, and this draw count keeps it within a loose band around the
    // closed-form center. The exact identity is checked via the expectation
    // test below; here only the constant offset matters.
    const double center =
        0.5 * static_cast<double>(dims.feature_dim) * (1.0 + kLog2Pi);
    CHECK(std::fabs(eval.value - center) < 2.0);
  }

  SUBCASE("decreasing logvar strictly decreases the loss at eps = 0") {
    ModelParams p = init_params(dims, 65);
    for (Tensor* t : p.generator.tensors()) *t = Tensor::zeros_like(*t);
    // eps = 0 cannot be forced through the public API, so compare the
    // analytic value: at eps = 0 the loss is 0.5 * sum(logvar + log2pi),
    // monotone in each logvar entry as long as it stays inside the clamp.
    Tensor z({1, dims.latent_dim});
    Tensor a({1, dims.attr_dim});
    p.generator.b_logvar = Tensor::full({dims.feature_dim}, 1.0);
    GaussianDiag hi = generate(p, z, a);
    p.generator.b_logvar = Tensor::full({dims.feature_dim}, 0.5);
    GaussianDiag lo = generate(p, z, a);
    auto nll_at_mean = [&](const GaussianDiag& g) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.logvar.numel(); ++i) {
        acc += 0.5 * (g.logvar[i] + kLog2Pi);
      }
      return acc;
    };
    CHECK(nll_at_mean(lo) < nll_at_mean(hi));
  }

  SUBCASE("expectation over draws approaches 0.5 sum(1 + logvar + log2pi)") {
    ModelParams p = init_params(dims, 69);
    for (Tensor* t : p.generator.tensors()) *t = Tensor::zeros_like(*t);
    p.generator.b_logvar = Tensor::full({dims.feature_dim}, -0.5);
    RngStream rng(70);
    double acc = 0.0;
    const int reps = 40;
    for (int rep = 0; rep < reps; ++rep) {
      acc += loss_reg(p, 250, bank, rng).value;  // 10^4 draws in total
    }
    acc /= reps;
    const double want =
        0.5 * static_cast<double>(dims.feature_dim) * (1.0 - 0.5 + kLog2Pi);
    CHECK(std::fabs(acc - want) < 0.02 * want);
  }

  SUBCASE("gradient matches finite differences") {
    ModelParams p = init_params(dims, 71);
    RngStream rng(72);
    LossEval eval = loss_reg(p, 6, bank, rng);
    auto outcome = test::fd_check_model(
        p, eval.grads, [&](const ModelParams& q) {
          RngStream r(72);
          return loss_reg(q, 6, bank, r).value;
        });
    CHECK(outcome.ok());
  }
}

TEST_CASE("loss_latent_consistency modes") {
  Dims dims = test::tiny_dims();
  ModelParams p = init_params(dims, 75);
  AttributeBank bank = tiny_bank(76);
  Batch batch = tiny_batch(dims, 77);

  SUBCASE("value is nonnegative in both modes") {
    for (auto mode : {LatentLossMode::posterior, LatentLossMode::prior}) {
      RngStream rng(78);
      LossEval eval = loss_latent_consistency(p, mode, batch, 6, bank, rng);
      CHECK(eval.value >= 0.0);
    }
  }

  SUBCASE("identical distributions give zero") {
    GaussianDiag a;
    a.mean = Tensor({4}, {0.1, 0.2, 0.3, 0.4});
    a.logvar = Tensor({4}, {-1.0, 0.0, 0.5, 1.0});
    CHECK(kl_diag_gauss(a, a) == doctest::Approx(0.0));
  }

  SUBCASE("posterior-mode gradient matches finite differences") {
    RngStream rng(79);
    LossEval eval = loss_latent_consistency(p, LatentLossMode::posterior,
                                            batch, 6, bank, rng);
    CHECK(test::grads_any_nonzero(eval.grads.generator));
    // In posterior mode the q-target is a stop-gradient copy of the encoder
    // posterior, so only the generator path is FD-comparable.
    auto outcome = test::fd_check_model(
        p, eval.grads,
        [&](const ModelParams& q) {
          RngStream r(79);
          return loss_latent_consistency(q, LatentLossMode::posterior, batch,
                                         6, bank, r)
              .value;
        },
        test::GroupMask{false, true, false});
    CHECK(outcome.ok());
  }

  SUBCASE("prior-mode gradient matches finite differences") {
    RngStream rng(80);
    LossEval eval = loss_latent_consistency(p, LatentLossMode::prior, batch,
                                            6, bank, rng);
    auto outcome = test::fd_check_model(
        p, eval.grads,
        [&](const ModelParams& q) {
          RngStream r(80);
          return loss_latent_consistency(q, LatentLossMode::prior, batch, 6,
                                         bank, r)
              .value;
        },
        test::GroupMask{true, true, false});
    CHECK(outcome.ok());
  }
}

TEST_CASE("loss_generator_total composition") {
  Dims dims = test::tiny_dims();
  ModelParams p = init_params(dims, 85);
  AttributeBank bank = tiny_bank(86);
  Batch batch = tiny_batch(dims, 87);

  SUBCASE("all lambdas zero equals loss_vae") {
    LossWeights w{0.0, 0.0, 0.0, 0.0};
    RngStream r1(88), r2(88);
    GeneratorLossEval total = loss_generator_total(
        p, batch, 6, bank, w, LatentLossMode::posterior, r1);
    CHECK(total.total == doctest::Approx(loss_vae(p, batch, r2).value));
  }

  SUBCASE("affine in each lambda at fixed randomness") {
    auto value_at = [&](double lc, double lreg, double le) {
      LossWeights w{0.1, lc, lreg, le};
      RngStream rng(89);
      return loss_generator_total(p, batch, 6, bank, w,
                                  LatentLossMode::posterior, rng)
          .total;
    };
    const double base = value_at(0.0, 0.0, 0.0);
    const double with_c = value_at(1.0, 0.0, 0.0);
    const double with_reg = value_at(0.0, 1.0, 0.0);
    const double with_e = value_at(0.0, 0.0, 1.0);
    const double mixed = value_at(0.5, 0.25, 0.75);
    const double expect = base + 0.5 * (with_c - base) +
                          0.25 * (with_reg - base) + 0.75 * (with_e - base);
    CHECK(mixed == doctest::Approx(expect).epsilon(1e-10));
  }

  SUBCASE("regressor grads stay exactly zero") {
    RngStream rng(90);
    GeneratorLossEval total = loss_generator_total(
        p, batch, 6, bank, LossWeights{}, LatentLossMode::posterior, rng);
    CHECK(test::grads_all_zero(total.grads.regressor));
    CHECK(test::grads_any_nonzero(total.grads.encoder));
    CHECK(test::grads_any_nonzero(total.grads.generator));
  }

  SUBCASE("full gradient matches finite differences on tiny dims") {
    RngStream rng(91);
    GeneratorLossEval total = loss_generator_total(
        p, batch, 5, bank, LossWeights{}, LatentLossMode::posterior, rng);
    // Posterior latent mode makes the encoder partly stop-gradient; the
    // generator path is fully FD-comparable.
    auto outcome = test::fd_check_model(
        p, total.grads,
        [&](const ModelParams& q) {
          RngStream r(91);
          return loss_generator_total(q, batch, 5, bank, LossWeights{},
                                      LatentLossMode::posterior, r)
              .total;
        },
        test::GroupMask{false, true, false});
    CHECK(outcome.ok());

    // Seed fixed to a draw where no ReLU pre-activation falls inside the FD
    // window (central differences are invalid across a kink).
    RngStream rng_prior(94);
    GeneratorLossEval total_prior = loss_generator_total(
        p, batch, 5, bank, LossWeights{}, LatentLossMode::prior, rng_prior);
    auto outcome_prior = test::fd_check_model(
        p, total_prior.grads,
        [&](const ModelParams& q) {
          RngStream r(94);
          return loss_generator_total(q, batch, 5, bank, LossWeights{},
                                      LatentLossMode::prior, r)
              .total;
        },
        test::GroupMask{true, true, false});
    CHECK(outcome_prior.ok());
  }

  SUBCASE("fixed seed gives bit-identical values and gradients") {
    RngStream r1(92), r2(92);
    GeneratorLossEval a = loss_generator_total(
        p, batch, 6, bank, LossWeights{}, LatentLossMode::posterior, r1);
    GeneratorLossEval b = loss_generator_total(
        p, batch, 6, bank, LossWeights{}, LatentLossMode::posterior, r2);
    CHECK(a.total == b.total);
    for (std::size_t i = 0; i < a.grads.encoder.size(); ++i) {
      CHECK(test::tensors_equal(a.grads.encoder[i], b.grads.encoder[i]));
    }
    for (std::size_t i = 0; i < a.grads.generator.size(); ++i) {
      CHECK(test::tensors_equal(a.grads.generator[i], b.grads.generator[i]));
    }
  }
}

#include <doctest.h>

#include <functional>
#include <random>

#include "auheat/nn/layers.hpp"
#include "auheat/nn/optim.hpp"

using namespace auheat;
using namespace auheat::nn;

namespace {

TensorD random_tensor(int n, int c, int h, int w, RngEngine& eng, double scale = 1.0) {
  TensorD t(n, c, h, w);
  std::normal_distribution<double> d(0.0, scale);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = d(eng);
  return t;
}

// Central finite differences against analytic grads for every checked
// parameter; returns the max relative error with denominator max(1, |g|).
double fd_check(const std::vector<ParamRef<double>>& checks, const std::function<double(bool)>& eval, double h = 1e-6) {
  eval(true);  // populate analytic grads
  std::vector<std::vector<double>> analytic;
  for (const auto& p : checks) analytic.emplace_back(p.grad, p.grad + p.size);

  double max_err = 0;
  for (size_t k = 0; k < checks.size(); ++k) {
    const auto& p = checks[k];
    for (Eigen::Index i = 0; i < p.size; ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double lp = eval(false);
      p.value[i] = saved - h;
      const double lm = eval(false);
      p.value[i] = saved;
      const double fd = (lp - lm) / (2 * h);
      const double g = analytic[k][static_cast<size_t>(i)];
      max_err = std::max(max_err, std::abs(g - fd) / std::max(1.0, std::abs(g)));
    }
  }
  return max_err;
}

ParamRef<double> input_ref(TensorD& x, TensorD& gx) {
  return {"input", x.data(), gx.data(), x.size(), {x.n(), x.c(), x.h(), x.w()}, ParamKind::kParam};
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("conv2d matches a direct convolution") {
    RngEngine eng(1);
    Conv2d<double> conv(2, 3, 3, 1, 1);
    conv.init(eng);
    TensorD x = random_tensor(1, 2, 5, 6, eng);
    Ctx ctx{false, nullptr};
    TensorD y = conv.forward(x, ctx);
    REQUIRE(y.c() == 3);
    REQUIRE(y.h() == 5);
    REQUIRE(y.w() == 6);
    // direct nested-loop oracle
    for (int oc = 0; oc < 3; ++oc)
      for (int oy = 0; oy < 5; ++oy)
        for (int ox = 0; ox < 6; ++ox) {
          double acc = conv.bias()[oc];
          for (int ic = 0; ic < 2; ++ic)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy + ky - 1, ix = ox + kx - 1;
                if (iy < 0 || iy >= 5 || ix < 0 || ix >= 6) continue;
                acc += conv.weight()(oc, (ic * 3 + ky) * 3 + kx) * x.at(0, ic, iy, ix);
              }
          CHECK(y.at(0, oc, oy, ox) == doctest::Approx(acc).epsilon(1e-10));
        }
  }

  TEST_CASE("conv2d gradients (stride 1, stride 2, pointwise)") {
    for (auto [k, stride, pad] : {std::tuple{3, 1, 1}, {3, 2, 1}, {1, 1, 0}}) {
      RngEngine eng(2);
      Conv2d<double> conv(2, 3, k, stride, pad);
      conv.init(eng);
      TensorD x = random_tensor(2, 2, 6, 5, eng);
      TensorD gx(2, 2, 6, 5);
      Ctx ctx{true, nullptr};
      TensorD target = random_tensor(2, 3, conv.out_h(6), conv.out_w(5), eng);

      auto params = collect_params<double>(conv, "conv");
      std::vector<ParamRef<double>> checks = params;
      checks.push_back(input_ref(x, gx));

      auto eval = [&](bool with_grad) {
        zero_grads(params);
        TensorD y = conv.forward(x, ctx);
        TensorD grad;
        const double loss = mse_loss(y, target, with_grad ? &grad : nullptr);
        if (with_grad) {
          TensorD gi = conv.backward(grad);
          gx.flat() = gi.flat();
        }
        return loss;
      };
      CHECK(fd_check(checks, eval) < 1e-6);
    }
  }

  TEST_CASE("linear gradients") {
    RngEngine eng(3);
    Linear<double> lin(7, 4);
    lin.init(eng);
    TensorD x = random_tensor(3, 7, 1, 1, eng);
    TensorD gx(3, 7, 1, 1);
    TensorD target = random_tensor(3, 4, 1, 1, eng);
    Ctx ctx{true, nullptr};
    auto params = collect_params<double>(lin, "lin");
    auto checks = params;
    checks.push_back(input_ref(x, gx));
    auto eval = [&](bool with_grad) {
      zero_grads(params);
      TensorD y = lin.forward(x, ctx);
      TensorD grad;
      const double loss = mse_loss(y, target, with_grad ? &grad : nullptr);
      if (with_grad) gx.flat() = lin.backward(grad).flat();
      return loss;
    };
    CHECK(fd_check(checks, eval) < 1e-6);
  }

  TEST_CASE("batchnorm training-mode gradients") {
    RngEngine eng(4);
    BatchNorm2d<double> bn(3);
    TensorD x = random_tensor(4, 3, 4, 4, eng);
    TensorD gx(4, 3, 4, 4);
    TensorD target = random_tensor(4, 3, 4, 4, eng);
    Ctx ctx{true, nullptr};
    auto params_all = collect_params<double>(bn, "bn");
    std::vector<ParamRef<double>> params;
    for (auto& p : params_all)
      if (p.kind == ParamKind::kParam) params.push_back(p);
    auto checks = params;
    checks.push_back(input_ref(x, gx));
    auto eval = [&](bool with_grad) {
      zero_grads(params);
      TensorD y = bn.forward(x, ctx);
      TensorD grad;
      const double loss = mse_loss(y, target, with_grad ? &grad : nullptr);
      if (with_grad) gx.flat() = bn.backward(grad).flat();
      return loss;
    };
    CHECK(fd_check(checks, eval) < 1e-6);
  }

  TEST_CASE("batchnorm running stats drive inference") {
    BatchNorm2d<float> bn(1);
    Ctx train{true, nullptr}, eval{false, nullptr};
    TensorF x(2, 1, 2, 2);
    x.flat() << 1, 2, 3, 4, 5, 6, 7, 8;
    bn.forward(x, train);
    CHECK(bn.running_mean()[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 4.5));
    // zero input + zero running stats + zero beta -> exactly zero output
    bn.running_mean().setZero();
    bn.running_var().setZero();
    TensorF zero_in(2, 1, 2, 2);
    TensorF y = bn.forward(zero_in, eval);
    for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(y.data()[i] == 0.0f);
  }

  TEST_CASE("instance norm gradients") {
    RngEngine eng(5);
    InstanceNorm<double> in(2);
    TensorD x = random_tensor(2, 2, 3, 5, eng);
    TensorD gx(2, 2, 3, 5);
    TensorD target = random_tensor(2, 2, 3, 5, eng);
    Ctx ctx{true, nullptr};
    std::vector<ParamRef<double>> checks = {input_ref(x, gx)};
    auto eval = [&](bool with_grad) {
      TensorD y = in.forward(x, ctx);
      TensorD grad;
      const double loss = mse_loss(y, target, with_grad ? &grad : nullptr);
      if (with_grad) gx.flat() = in.backward(grad).flat();
      return loss;
    };
    CHECK(fd_check(checks, eval) < 1e-6);
  }

  TEST_CASE("style norm gradients flow to affine, input, and styles") {
    RngEngine eng(6);
    StyleNorm<double> sn(3, 5);
    sn.init(eng);
    TensorD x = random_tensor(2, 3, 4, 4, eng);
    TensorD gx(2, 3, 4, 4);
    MatX<double> styles = MatX<double>::Random(2, 5);
    MatX<double> gstyles(2, 5);
    TensorD target = random_tensor(2, 3, 4, 4, eng);
    Ctx ctx{true, nullptr};

    auto params = collect_params<double>(sn, "sn");
    auto checks = params;
    checks.push_back(input_ref(x, gx));
    checks.push_back({"styles", styles.data(), gstyles.data(), styles.size(), {2, 5}, ParamKind::kParam});

    auto eval = [&](bool with_grad) {
      zero_grads(params);
      TensorD y = sn.forward(x, styles, ctx);
      TensorD grad;
      const double loss = mse_loss(y, target, with_grad ? &grad : nullptr);
      if (with_grad) {
        gstyles.setZero();
        gx.flat() = sn.backward(grad, gstyles).flat();
      }
      return loss;
    };
    CHECK(fd_check(checks, eval) < 1e-6);
  }

  TEST_CASE("upsample and bilinear resize gradients") {
    RngEngine eng(7);
    TensorD x = random_tensor(1, 2, 4, 4, eng);
    TensorD gx(1, 2, 4, 4);
    Ctx ctx{true, nullptr};

    Upsample2x<double> up;
    TensorD target_up = random_tensor(1, 2, 8, 8, eng);
    std::vector<ParamRef<double>> checks = {input_ref(x, gx)};
    auto eval_up = [&](bool with_grad) {
      TensorD y = up.forward(x, ctx);
      TensorD grad;
      const double loss = mse_loss(y, target_up, with_grad ? &grad : nullptr);
      if (with_grad) gx.flat() = up.backward(grad).flat();
      return loss;
    };
    CHECK(fd_check(checks, eval_up) < 1e-6);

    BilinearResize<double> rz(7, 5);
    TensorD target_rz = random_tensor(1, 2, 7, 5, eng);
    auto eval_rz = [&](bool with_grad) {
      TensorD y = rz.forward(x, ctx);
      TensorD grad;
      const double loss = mse_loss(y, target_rz, with_grad ? &grad : nullptr);
      if (with_grad) gx.flat() = rz.backward(grad).flat();
      return loss;
    };
    CHECK(fd_check(checks, eval_rz) < 1e-6);
  }

  TEST_CASE("bilinear resize to the same size is the identity") {
    RngEngine eng(8);
    TensorD x = random_tensor(1, 1, 6, 6, eng);
    BilinearResize<double> rz(6, 6);
    Ctx ctx{false, nullptr};
    TensorD y = rz.forward(x, ctx);
    CHECK((y.flat() - x.flat()).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("leaky relu forward/backward") {
    LeakyReLU<double> act(0.2);
    TensorD x(1, 1, 1, 4);
    x.flat() << -2, -0.5, 0.5, 2;
    Ctx ctx{true, nullptr};
    TensorD y = act.forward(x, ctx);
    CHECK(y.flat()[0] == doctest::Approx(-0.4));
    CHECK(y.flat()[2] == doctest::Approx(0.5));
    TensorD g(1, 1, 1, 4);
    g.flat().setOnes();
    TensorD gx = act.backward(g);
    CHECK(gx.flat()[0] == doctest::Approx(0.2));
    CHECK(gx.flat()[3] == doctest::Approx(1.0));
  }

  TEST_CASE("dropout is identity at inference and masks consistently in training") {
    RngEngine eng(9);
    Dropout<double> drop(0.5);
    TensorD x = random_tensor(1, 1, 8, 8, eng);
    Ctx eval{false, nullptr};
    TensorD y = drop.forward(x, eval);
    CHECK((y.flat() - x.flat()).cwiseAbs().maxCoeff() == 0.0);

    Ctx train{true, &eng};
    TensorD yt = drop.forward(x, train);
    TensorD g(1, 1, 8, 8);
    g.flat().setOnes();
    TensorD gx = drop.backward(g);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (yt.data()[i] == 0.0)
        CHECK(gx.data()[i] == 0.0);
      else
        CHECK(yt.data()[i] == doctest::Approx(x.data()[i] * 2.0));
    }
  }

  TEST_CASE("bce with logits matches a direct formula and its gradient") {
    RngEngine eng(10);
    TensorD z = random_tensor(2, 3, 1, 1, eng);
    TensorD t(2, 3, 1, 1);
    t.flat() << 1, 0, 1, 0, 0, 1;
    TensorD grad;
    const double loss = bce_with_logits(z, t, &grad);
    double expect = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z.data()[i]));
      expect += -(t.data()[i] * std::log(p) + (1 - t.data()[i]) * std::log(1 - p));
    }
    expect /= static_cast<double>(z.size());
    CHECK(loss == doctest::Approx(expect).epsilon(1e-9));

    const double h = 1e-6;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double saved = z.data()[i];
      z.data()[i] = saved + h;
      const double lp = bce_with_logits(z, t);
      z.data()[i] = saved - h;
      const double lm = bce_with_logits(z, t);
      z.data()[i] = saved;
      CHECK(grad.data()[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
    }
  }

  TEST_CASE("adamw minimizes a quadratic and clip caps the norm") {
    VecX<double> theta(3);
    theta << 5, -3, 2;
    VecX<double> g(3);
    std::vector<ParamRef<double>> params = {{"theta", theta.data(), g.data(), 3, {3}, ParamKind::kParam}};
    AdamWOptions opt;
    opt.lr = 0.1;
    AdamW<double> adam(params, opt);
    for (int i = 0; i < 200; ++i) {
      g = 2 * theta;  // d/dtheta ||theta||^2
      const double post = clip_global_grad_norm(params, 0.5);
      CHECK(post <= 0.5 + 1e-9);
      adam.step();
    }
    CHECK(theta.norm() < 0.5);
  }
}

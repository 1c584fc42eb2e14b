// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cvrnn/errors.hpp"
#include "cvrnn/objectives.hpp"
#include "cvrnn/ops.hpp"
#include "support.hpp"

namespace cvrnn {
namespace {

using testing::random_tensor;

double oracle_l1(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double oracle_gdl(const Tensor& a, const Tensor& b, double alpha) {
  const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  double sw = 0, sh = 0;
  int cw = 0, ch = 0;
  for (int s = 0; s < n; ++s)
    for (int k = 0; k < c; ++k)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          if (j + 1 < w) {
            const double d = std::abs(std::abs(a.at(s, k, i, j + 1) - a.at(s, k, i, j)) -
                                      std::abs(b.at(s, k, i, j + 1) - b.at(s, k, i, j)));
            sw += std::pow(d, alpha);
            ++cw;
          }
          if (i + 1 < h) {
            const double d = std::abs(std::abs(a.at(s, k, i + 1, j) - a.at(s, k, i, j)) -
                                      std::abs(b.at(s, k, i + 1, j) - b.at(s, k, i, j)));
            sh += std::pow(d, alpha);
            ++ch;
          }
        }
  return sw / cw + sh / ch;
}

// Straight-loop multi-scale SSIM over one [H, W] plane per (n, c), averaged.
struct Plane {
  int h, w;
  std::vector<double> v;
  double operator()(int i, int j) const { return v[static_cast<std::size_t>(i * w + j)]; }
};

Plane pool(const Plane& p) {
  Plane q{p.h / 2, p.w / 2, {}};
  q.v.resize(static_cast<std::size_t>(q.h * q.w));
  for (int i = 0; i < q.h; ++i)
    for (int j = 0; j < q.w; ++j)
      q.v[static_cast<std::size_t>(i * q.w + j)] =
          0.25 * (p(2 * i, 2 * j) + p(2 * i + 1, 2 * j) + p(2 * i, 2 * j + 1) + p(2 * i + 1, 2 * j + 1));
  return q;
}

double oracle_msssim(const Tensor& a, const Tensor& b, int scales, int win, double sigma, bool gaussian) {
  std::vector<double> g(static_cast<std::size_t>(win * win));
  const double r = (win - 1) / 2.0;
  for (int u = 0; u < win; ++u)
    for (int v = 0; v < win; ++v)
      g[static_cast<std::size_t>(u * win + v)] =
          gaussian ? std::exp(-((u - r) * (u - r) + (v - r) * (v - r)) / (2 * sigma * sigma)) : 1.0;
  const double gs = std::accumulate(g.begin(), g.end(), 0.0);
  for (double& x : g) x /= gs;
  const double full[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  double wsum = 0;
  for (int s = 0; s < scales; ++s) wsum += full[s];

  Plane x{a.dim(2), a.dim(3), {}}, y{a.dim(2), a.dim(3), {}};
  const int n = a.dim(0), c = a.dim(1);
  std::vector<double> cs_mean(static_cast<std::size_t>(scales), 0.0);
  // Mean over every valid position of every (n, c) plane, per scale.
  std::vector<double> counts(static_cast<std::size_t>(scales), 0.0);
  for (int s0 = 0; s0 < n; ++s0)
    for (int k = 0; k < c; ++k) {
      x.h = y.h = a.dim(2);
      x.w = y.w = a.dim(3);
      x.v.clear();
      y.v.clear();
      for (int i = 0; i < x.h; ++i)
        for (int j = 0; j < x.w; ++j) {
          x.v.push_back(a.at(s0, k, i, j));
          y.v.push_back(b.at(s0, k, i, j));
        }
      Plane px = x, py = y;
      for (int s = 0; s < scales; ++s) {
        if (s > 0) {
          px = pool(px);
          py = pool(py);
        }
        for (int i = 0; i + win <= px.h; ++i)
          for (int j = 0; j + win <= px.w; ++j) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int u = 0; u < win; ++u)
              for (int v = 0; v < win; ++v) {
                const double wt = g[static_cast<std::size_t>(u * win + v)];
                const double p = px(i + u, j + v), q = py(i + u, j + v);
                mx += wt * p;
                my += wt * q;
                xx += wt * p * p;
                yy += wt * q * q;
                xy += wt * p * q;
              }
            const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
            double val = (2 * cov + kSsimC2) / (vx + vy + kSsimC2);
            if (s == scales - 1) val *= (2 * mx * my + kSsimC1) / (mx * mx + my * my + kSsimC1);
            cs_mean[static_cast<std::size_t>(s)] += val;
            counts[static_cast<std::size_t>(s)] += 1;
          }
      }
    }
  double prod = 1;
  for (int s = 0; s < scales; ++s) {
    const double m = std::max(cs_mean[static_cast<std::size_t>(s)] / counts[static_cast<std::size_t>(s)], 1e-6);
    prod *= std::pow(m, full[s] / wsum);
  }
  return 1 - prod;
}

LossConfig small_loss(int scales = 2, int window = 5) {
  LossConfig c;
  c.msssim_scales = scales;
  c.msssim_window = window;
  c.msssim_sigma = 1.0;
  return c;
}

TEST(Objectives, L1AndGdlMatchLoops) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor a = random_tensor({2, 3, 8, 7}, seed);
    const Tensor b = random_tensor({2, 3, 8, 7}, seed + 100);
    EXPECT_NEAR(l1_loss(a, b), oracle_l1(a, b), 1e-14);
    EXPECT_NEAR(gdl_loss(a, b, 1.0), oracle_gdl(a, b, 1.0), 1e-14);
    EXPECT_NEAR(gdl_loss(a, b, 2.0), oracle_gdl(a, b, 2.0), 1e-14);
  }
}

TEST(Objectives, MsssimMatchesLoopOracle) {
  for (bool gaussian : {true, false}) {
    for (int scales : {1, 2, 3}) {
      LossConfig cfg = small_loss(scales, 5);
      cfg.msssim_gaussian = gaussian;
      const Tensor a = random_tensor({2, 1, 24, 24}, 3);
      Tensor b = a;
      const Tensor noise = random_tensor(a.shape(), 4, -0.2, 0.2);
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::clamp(b[i] + noise[i], 0.0, 1.0);
      EXPECT_NEAR(msssim_loss(a, b, cfg), oracle_msssim(a, b, scales, 5, 1.0, gaussian), 1e-12)
          << "scales=" << scales << " gaussian=" << gaussian;
    }
  }
}

TEST(Objectives, SsimOfConstantPatchesByHand) {
  // Single scale, uniform window covering the whole 4x4 patch: variances and
  // covariance vanish, so SSIM reduces to the luminance term.
  LossConfig cfg;
  cfg.msssim_scales = 1;
  cfg.msssim_window = 4;
  cfg.msssim_gaussian = false;
  const double ca = 0.2, cb = 0.6;
  const Tensor a({1, 1, 4, 4}, ca), b({1, 1, 4, 4}, cb);
  const double lum = (2 * ca * cb + kSsimC1) / (ca * ca + cb * cb + kSsimC1);
  EXPECT_NEAR(msssim_loss(a, b, cfg), 1.0 - lum, 1e-12);
  EXPECT_NEAR(msssim_loss(a, a, cfg), 0.0, 1e-15);
}

TEST(Objectives, Identities) {
  const LossConfig cfg = small_loss();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = random_tensor({1, 2, 16, 16}, seed);
    const Tensor b = random_tensor({1, 2, 16, 16}, seed + 50);
    EXPECT_EQ(l1_loss(a, a), 0.0);
    EXPECT_NEAR(msssim_loss(a, a, cfg), 0.0, 1e-9);
    EXPECT_EQ(gdl_loss(a, a, 1.0), 0.0);
    EXPECT_NEAR(l1_loss(a, b), l1_loss(b, a), 1e-15);
    EXPECT_NEAR(msssim_loss(a, b, cfg), msssim_loss(b, a, cfg), 1e-12);
    EXPECT_NEAR(gdl_loss(a, b, 1.0), gdl_loss(b, a, 1.0), 1e-15);
    EXPECT_GE(l1_loss(a, b), 0.0);
    EXPECT_GE(msssim_loss(a, b, cfg), 0.0);
    EXPECT_GE(gdl_loss(a, b, 1.0), 0.0);
    Tensor shifted = a;
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.37;
    EXPECT_NEAR(gdl_loss(a, shifted, 1.0), 0.0, 1e-9);
  }
}

TEST(Objectives, WeightsAndWindow) {
  for (int s = 1; s <= 5; ++s) {
    const auto w = msssim_weights(s);
    EXPECT_EQ(static_cast<int>(w.size()), s);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-15);
  }
  EXPECT_NEAR(ssim_window(11, 1.5, true).sum(), 1.0, 1e-15);
  EXPECT_THROW(msssim_weights(0), ConfigError);
  EXPECT_THROW(msssim_weights(6), ConfigError);
}

TEST(Objectives, LossGradients) {
  const LossConfig cfg = small_loss();
  const Tensor target = random_tensor({1, 1, 16, 16}, 9);
  const std::vector<std::pair<std::string, std::function<Var(const Var&, const Var&)>>> losses = {
      {"l1", [](const Var& p, const Var& t) { return l1_loss(p, t); }},
      {"gdl", [](const Var& p, const Var& t) { return gdl_loss(p, t, 1.0); }},
      {"gdl2", [](const Var& p, const Var& t) { return gdl_loss(p, t, 2.0); }},
      {"msssim", [&cfg](const Var& p, const Var& t) { return msssim_loss(p, t, cfg); }},
      {"total", [&cfg](const Var& p, const Var& t) { return prediction_loss(p, t, cfg); }},
  };
  for (const auto& [name, fn] : losses) {
    auto f = [&](Tape& tape, const std::vector<Var>& v) { return fn(v[0], tape.constant(target)); };
    const auto r = testing::grad_check(f, {random_tensor({1, 1, 16, 16}, 10)});
    EXPECT_LT(r.worst_rel, 1e-3) << name;
  }
}

TEST(Objectives, KlClosedForm) {
  LatentGaussian q{Tensor({1}, 1.0), Tensor({1}, 0.0)};
  LatentGaussian p{Tensor({1}, 0.0), Tensor({1}, 0.0)};
  EXPECT_NEAR(kl_gauss(q, p), 0.5, 1e-15);
  EXPECT_EQ(kl_gauss(q, q), 0.0);
  const Tensor m = random_tensor({3, 20}, 1, -2, 2), lv = random_tensor({3, 20}, 2, -2, 2);
  EXPECT_EQ(kl_gauss({m, lv}, {m, lv}), 0.0);
}

TEST(Objectives, KlMatchesMonteCarlo) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int pair = 0; pair < 5; ++pair) {
    const Tensor mq = random_tensor({20}, 10 + pair, -1, 1), lq = random_tensor({20}, 20 + pair, -1, 1);
    const Tensor mp = random_tensor({20}, 30 + pair, -1, 1), lp = random_tensor({20}, 40 + pair, -1, 1);
    const int samples = 100000;
    double acc = 0;
    for (int s = 0; s < samples; ++s) {
      double log_ratio = 0;
      for (int i = 0; i < 20; ++i) {
        const double z = mq[i] + std::exp(0.5 * lq[i]) * normal(rng);
        const double dq = (z - mq[i]) * (z - mq[i]) / std::exp(lq[i]);
        const double dp = (z - mp[i]) * (z - mp[i]) / std::exp(lp[i]);
        log_ratio += -0.5 * (lq[i] + dq) + 0.5 * (lp[i] + dp);
      }
      acc += log_ratio;
    }
    const double closed = kl_gauss({mq, lq}, {mp, lp});
    EXPECT_NEAR(acc / samples, closed, 0.01 * closed);
  }
}

TEST(Objectives, TotalObjective) {
  const std::vector<double> kl = {0.5, 1.5, 2.0, 0.0};
  EXPECT_DOUBLE_EQ(total_objective(kl, 3.0, 0.25), 4.0);
  EXPECT_DOUBLE_EQ(total_objective(kl, 3.0, 0.0), 3.0);
  Tape tape;
  const Var pred = tape.leaf(Tensor({1}, 3.0));
  const Var k = tape.leaf(Tensor({2}, std::vector<double>{1.0, 2.0}));
  const Var t = total_objective({k}, pred, 2.0);
  EXPECT_DOUBLE_EQ(t.value()[0], 9.0);
  tape.backward(t);
  EXPECT_DOUBLE_EQ(tape.grad(k)[1], 2.0);
}

TEST(Objectives, ConfigValidation) {
  LossConfig none;
  none.use_l1 = none.use_msssim = none.use_gdl = false;
  EXPECT_THROW(none.validate(64), ConfigError);
  LossConfig big;  // 3 scales, window 11 needs side >= 44
  EXPECT_NO_THROW(big.validate(64));
  EXPECT_THROW(big.validate(32), ConfigError);
  big.use_msssim = false;
  EXPECT_NO_THROW(big.validate(32));
  const Tensor a({1, 1, 32, 32}, 0.5);
  EXPECT_THROW(msssim_loss(a, a, LossConfig{}), ConfigError);
  EXPECT_THROW(l1_loss(a, Tensor({1, 1, 32, 31})), DimensionError);
}

}  // namespace
}  // namespace cvrnn

// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "adalrs/controller.hpp"
#include "adalrs/errors.hpp"
#include "adalrs/oracle.hpp"
#include "adalrs/rng.hpp"

using namespace adalrs;

namespace {

AdaLRSConfig small_cfg(std::int64_t k = 10) {
  AdaLRSConfig cfg;
  cfg.window_k = k;
  cfg.search_start_ratio = 0.0;
  cfg.search_end_ratio = 1.0;
  return cfg;
}

// Feeds `count` losses a - v*i starting at `step`; returns the last action.
Action feed_line(Controller& c, std::int64_t& step, std::int64_t count, double a, double v) {
  Action last;
  for (std::int64_t i = 0; i < count; ++i) last = c.observe(step++, a - v * static_cast<double>(i));
  return last;
}

LossWindow flat(std::int64_t first, std::size_t k, double value) {
  return LossWindow::from_losses(first, std::vector<double>(k, value));
}

}  // namespace

TEST_CASE("rectified factors") {
  AdaLRSConfig cfg;
  auto f = rectified_factors(cfg, 0);
  CHECK(f.alpha_prime == 3.0);
  CHECK(f.beta_prime_inv == 2.0);

  // Smallest n with lambda^n * alpha <= 1, found by direct evaluation.
  std::int64_t n_star = 0;
  while (std::pow(0.99, static_cast<double>(n_star)) * 3.0 > 1.0) ++n_star;
  CHECK(n_star == 110);
  CHECK(rectified_factors(cfg, 109).alpha_prime > 1.0);
  CHECK(rectified_factors(cfg, 110).alpha_prime == 1.0);
  CHECK(rectified_factors(cfg, 111).alpha_prime == 1.0);

  cfg.alpha = 2.0;
  cfg.beta = 1.67;
  cfg.lambda = 0.9;
  f = rectified_factors(cfg, 3);
  CHECK(f.alpha_prime == doctest::Approx(1.458).epsilon(1e-12));
  CHECK(f.beta_prime_inv == doctest::Approx(1.21743).epsilon(1e-12));
  CHECK_THROWS_AS(rectified_factors(cfg, -1), InputError);
}

TEST_CASE("factors never drop below one and never grow") {
  AdaLRSConfig cfg;
  double prev_a = 4.0, prev_b = 4.0;
  for (std::int64_t n = 0; n < 300; ++n) {
    const auto f = rectified_factors(cfg, n);
    CHECK(f.alpha_prime >= 1.0);
    CHECK(f.beta_prime_inv >= 1.0);
    CHECK(f.alpha_prime <= prev_a);
    CHECK(f.beta_prime_inv <= prev_b);
    prev_a = f.alpha_prime;
    prev_b = f.beta_prime_inv;
  }
}

TEST_CASE("effective lr") {
  AdaLRSConfig cfg;
  ControllerState s;
  CHECK(effective_lr(2e-4, s, cfg) == 2e-4);
  s.scale = 18.0;
  CHECK(effective_lr(2e-5, s, cfg) == doctest::Approx(3.6e-4).epsilon(1e-12));
  s.scale = 0.5;
  CHECK(effective_lr(1e-4, s, cfg) == 5e-5);
}

TEST_CASE("ramp multiplier") {
  AdaLRSConfig cfg;
  cfg.window_k = 200;
  ControllerState s;
  s.phase = Phase::UpscaleRamp;
  s.trial_alpha_prime = 3.0;
  s.ramp_progress = 0;
  CHECK(ramp_multiplier(s, cfg) == 1.0);
  s.ramp_progress = 200;
  CHECK(ramp_multiplier(s, cfg) == 3.0);
  s.ramp_progress = 100;
  CHECK(ramp_multiplier(s, cfg) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  s.scale = 0.25;
  CHECK(ramp_multiplier(s, cfg) == doctest::Approx(0.25 * std::sqrt(3.0)).epsilon(1e-12));

  s.phase = Phase::Monitoring;
  CHECK_THROWS_AS(ramp_multiplier(s, cfg), StateError);
}

TEST_CASE("ramp increments are geometric") {
  AdaLRSConfig cfg;
  cfg.window_k = 16;
  ControllerState s;
  s.phase = Phase::UpscaleRamp;
  s.trial_alpha_prime = 2.5;
  double prev = 1.0;
  for (std::int64_t p = 1; p <= 16; ++p) {
    s.ramp_progress = p;
    const double m = ramp_multiplier(s, cfg);
    CHECK(m / prev == doctest::Approx(std::pow(2.5, 1.0 / 16.0)).epsilon(1e-12));
    prev = m;
  }
}

TEST_CASE("one window is never enough to trigger") {
  Controller c(small_cfg(), 1000);
  std::int64_t step = 0;
  // A sharply slowing descent inside a single window.
  for (int i = 0; i < 10; ++i) CHECK(c.observe(step++, 1.0 / (1.0 + i)).kind == ActionKind::Continue);
  CHECK(c.state().history.size() == 1);
  CHECK(c.events().empty());
}

TEST_CASE("velocity drop below theta triggers a trial") {
  auto cfg = small_cfg();
  cfg.theta0 = 0.8;
  Controller c(cfg, 1000);
  std::int64_t step = 0;
  CHECK(feed_line(c, step, 10, 5.0, 0.010).kind == ActionKind::Continue);
  const auto a = feed_line(c, step, 10, 4.9, 0.007);
  CHECK(a.kind == ActionKind::BeginTrialUpscale);
  CHECK(a.take_checkpoint.has_value());
  CHECK(c.state().phase == Phase::UpscaleRamp);
  CHECK(c.state().v_before == doctest::Approx(0.007));
}

TEST_CASE("a mild slowdown narrows theta instead") {
  auto cfg = small_cfg();
  cfg.theta0 = 0.8;
  Controller c(cfg, 1000);
  std::int64_t step = 0;
  feed_line(c, step, 10, 5.0, 0.010);
  CHECK(feed_line(c, step, 10, 4.9, 0.009).kind == ActionKind::Continue);
  CHECK(c.state().theta == doctest::Approx(0.9));
  CHECK(feed_line(c, step, 10, 4.8, 0.0085).kind == ActionKind::Continue);
  CHECK(c.state().theta == doctest::Approx(0.95));
}

TEST_CASE("two rising windows force a boundary downscale") {
  Controller c(small_cfg(), 1000);
  std::int64_t step = 0;
  feed_line(c, step, 10, 1.0, -0.002);
  const auto a = feed_line(c, step, 10, 1.1, -0.001);
  REQUIRE(a.kind == ActionKind::BoundaryDownscale);
  REQUIRE(a.event);
  CHECK(a.event->kind == EventKind::BoundaryDownscale);
  CHECK(a.event->new_scale == doctest::Approx(0.5));
  CHECK_FALSE(a.take_checkpoint);
  CHECK_FALSE(a.restore_checkpoint);
  CHECK(c.state().adjustment_count == 1);
  CHECK(c.state().history.empty());
  CHECK(c.state().theta == c.config().theta0);
}

TEST_CASE("nothing happens outside the search range") {
  auto cfg = small_cfg();
  cfg.search_start_ratio = 0.5;
  cfg.search_end_ratio = 0.6;
  Controller c(cfg, 200);
  CHECK(c.search_start() == 100);
  CHECK(c.search_end() == 120);
  std::int64_t step = 0;
  // Rising, decelerating losses force a boundary downscale once two windows
  // are in range.
  for (; step < 200; ++step) {
    const auto a = c.observe(step, 2.0 - 100.0 / static_cast<double>(step + 1));
    if (a.event) {
      CHECK(a.event->step >= c.search_start());
      CHECK(a.event->step < c.search_end());
    }
  }
  REQUIRE(c.events().size() == 1);
  CHECK(c.events()[0].step == 119);
}

TEST_CASE("observe rejects bad input") {
  Controller c(small_cfg(), 100);
  CHECK_THROWS_AS(c.observe(0, std::nan("")), InputError);
  c.observe(3, 1.0);
  CHECK_THROWS_AS(c.observe(3, 1.0), InputError);
  CHECK_THROWS_AS(c.observe(2, 1.0), InputError);
  CHECK_THROWS_AS(c.abort_trial(4), StateError);
}

TEST_CASE("reference window examples") {
  AdaLRSConfig cfg;
  const std::vector<LossWindow> h{flat(0, 5, 2.0), flat(5, 5, 1.5), flat(10, 5, 1.2)};

  auto m = find_reference_window(h, flat(20, 5, 1.4), cfg);
  REQUIRE(m);
  CHECK(m->mean == 1.5);
  CHECK(m->window.front().step == 5);

  // 1.35 sits halfway between 1.5 and 1.2 up to rounding; the later window wins.
  cfg.comparable_gap_threshold = 0.5;
  m = find_reference_window(h, flat(20, 5, 1.35), cfg);
  REQUIRE(m);
  CHECK(m->mean == 1.2);

  const std::vector<LossWindow> high{flat(0, 5, 2.0), flat(5, 5, 3.0)};
  CHECK_FALSE(find_reference_window(high, flat(20, 5, 0.5), cfg));
  CHECK_THROWS_AS(find_reference_window(std::vector<LossWindow>{}, flat(0, 5, 1.0), cfg),
                  InputError);
}

TEST_CASE("reference search slides inside a record") {
  AdaLRSConfig cfg;
  std::vector<double> losses;
  for (int i = 0; i < 40; ++i) losses.push_back(10.0 - 0.25 * i);
  const std::vector<LossWindow> h{LossWindow::from_losses(100, losses)};
  // Target mean 6.0 is hit exactly by the sub-window starting at offset 14.
  std::vector<double> fresh(5, 6.0);
  const auto m = find_reference_window(h, LossWindow::from_losses(500, fresh), cfg);
  REQUIRE(m);
  CHECK(m->window.front().step == 114);
  CHECK(m->window.size() == 5);
  CHECK(m->relative_gap == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mean extremes over sub-windows") {
  std::vector<double> losses{5, 1, 1, 9, 9, 2};
  const std::vector<LossWindow> h{LossWindow::from_losses(0, losses)};
  // Brute force over every length-2 slice.
  double lo = 1e9, hi = -1e9;
  for (std::size_t i = 0; i + 2 <= losses.size(); ++i) {
    lo = std::min(lo, (losses[i] + losses[i + 1]) / 2);
    hi = std::max(hi, (losses[i] + losses[i + 1]) / 2);
  }
  const auto ext = history_mean_extremes(h, 2);
  CHECK(ext.min_mean == lo);
  CHECK(ext.max_mean == hi);
}

TEST_CASE("mean extremes survive a huge dynamic range") {
  std::vector<double> losses;
  for (int i = 0; i < 400; ++i) losses.push_back(1e200 * std::pow(0.5, i));
  const std::vector<LossWindow> h{LossWindow::from_losses(0, losses)};
  const auto ext = history_mean_extremes(h, 50);
  CHECK(ext.min_mean > 0.0);
  CHECK(ext.max_mean > 1e197);
}

TEST_CASE("decision examples") {
  const MeanExtremes ext{1.0, 2.0};
  const double e = 0.01;
  CHECK(decide_after_validation(0.5 + 3 * e, 0.5, e, true, 1.5, ext) == Decision::KeepUpscale);
  CHECK(decide_after_validation(0.5 - 3 * e, 0.5, e, true, 1.5, ext) ==
        Decision::RevertAndDownscale);
  CHECK(decide_after_validation(0.5 + e, 0.5, e, true, 1.5, ext) == Decision::RevertOnly);
  CHECK(decide_after_validation(0.5, 0.5, 0.0, true, 1.5, ext) == Decision::RevertOnly);
}

TEST_CASE("decision without a comparable window") {
  const MeanExtremes ext{1.0, 2.0};
  CHECK(decide_after_validation(0, 0, 0, false, 0.5, ext) == Decision::KeepUpscale);
  CHECK(decide_after_validation(0, 0, 0, false, 2.5, ext) == Decision::RevertAndDownscale);
  CHECK(decide_after_validation(0, 0, 0, false, 1.5, ext) == Decision::RevertOnly);
  // Velocities are ignored in this branch.
  CHECK(decide_after_validation(100, 0, 0, false, 1.5, ext) == Decision::RevertOnly);
}

TEST_CASE("decision is antisymmetric in the velocity band") {
  Rng rng(5);
  const MeanExtremes ext{0.0, 1.0};
  for (int i = 0; i < 5000; ++i) {
    const double a = rng.normal();
    const double b = rng.normal();
    const double e = rng.uniform() * 0.5;
    const auto d = decide_after_validation(a, b, e, true, 0.5, ext);
    const auto swapped = decide_after_validation(b, a, e, true, 0.5, ext);
    switch (d) {
      case Decision::KeepUpscale:
        CHECK(swapped == Decision::RevertAndDownscale);
        break;
      case Decision::RevertAndDownscale:
        CHECK(swapped == Decision::KeepUpscale);
        break;
      case Decision::RevertOnly:
        CHECK(swapped == Decision::RevertOnly);
        break;
    }
  }
}

TEST_CASE("kept upscales raise the true velocity") {
  // Synthetic velocity curve V(eta) = eta * exp(-eta / 0.01), peak at 0.01,
  // observed through estimates within e of the truth.
  auto V = [](double eta) { return eta * std::exp(-eta / 0.01); };
  Rng rng(17);
  int kept = 0, separated = 0;
  for (int i = 0; i < 20000; ++i) {
    const double eta = 1e-5 * std::pow(10.0, 3.0 * rng.uniform());
    const double alpha_prime = 1.0 + 2.0 * rng.uniform();
    const double e = 1e-4 * rng.uniform();
    const double gap = V(alpha_prime * eta) - V(eta);
    const double v_new = V(alpha_prime * eta) + e * (2 * rng.uniform() - 1);
    const double v_ref = V(eta) + e * (2 * rng.uniform() - 1);
    const auto d = decide_after_validation(v_new, v_ref, e, true, 0.5, {0.0, 1.0});
    if (d == Decision::KeepUpscale) {
      CHECK(gap > 0.0);
      ++kept;
    }
    // Estimates can each be off by e, so only a 4e true gap forces a keep.
    if (gap > 4 * e) {
      CHECK(d == Decision::KeepUpscale);
      ++separated;
    }
  }
  CHECK(kept > 100);
  CHECK(separated > 100);
}

TEST_CASE("multiplicative independence") {
  CHECK(multiplicatively_independent(3.0, 2.0));
  CHECK(multiplicatively_independent(2.0, 1.67));
  CHECK_FALSE(multiplicatively_independent(4.0, 2.0));
  CHECK_FALSE(multiplicatively_independent(8.0, 4.0));
  AdaLRSConfig cfg;
  cfg.alpha = 4.0;
  cfg.beta = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config validation") {
  AdaLRSConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.search_start_ratio = 0.5;
  cfg.search_end_ratio = 0.4;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "adalrs.search_end_ratio");
  }
}

TEST_CASE("event kind names round-trip") {
  for (auto k : {EventKind::UpscaleKept, EventKind::UpscaleRevertedThenDownscale,
                 EventKind::RevertOnly, EventKind::BoundaryDownscale}) {
    CHECK(parse_event_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_event_kind("sideways"), InputError);
}

namespace {

struct Trial {
  Controller controller;
  std::vector<Action> actions;
};

// Drive a trial to its decision with scripted losses. Monitoring windows
// descend at 0.01 then 0.005 per step; the validation window is a line with
// the given mean and velocity plus a small zigzag, so e is nonzero.
Trial run_trial(AdaLRSConfig cfg, double val_mean, double val_v, double ramp_loss = 0.0) {
  Trial t{Controller(cfg, 10000), {}};
  std::int64_t step = 0;
  const auto k = cfg.window_k;
  t.actions.push_back(feed_line(t.controller, step, k, 10.0, 0.01));
  t.actions.push_back(feed_line(t.controller, step, k, 9.8, 0.005));
  for (std::int64_t i = 0; i < k; ++i) {
    t.actions.push_back(t.controller.observe(step++, ramp_loss));
    if (t.controller.state().phase == Phase::Validating) break;
  }
  const double first = val_mean + val_v * static_cast<double>(k - 1) / 2.0;
  Action last;
  for (std::int64_t i = 0; i < k; ++i) {
    const double zig = (i % 2 == 0) ? 1e-3 : -1e-3;
    last = t.controller.observe(step++, first - val_v * static_cast<double>(i) + zig);
  }
  t.actions.push_back(last);
  return t;
}

}  // namespace

TEST_CASE("trial keeps an upscale that beats its reference") {
  auto t = run_trial(small_cfg(), 9.7, 0.05);
  const auto& a = t.actions.back();
  REQUIRE(a.kind == ActionKind::KeepUpscale);
  CHECK_FALSE(a.restore_checkpoint);
  CHECK(a.release_checkpoint == t.actions[1].take_checkpoint);
  CHECK(t.controller.state().scale == 3.0);
  REQUIRE(a.event->v_after);
  CHECK(*a.event->v_after == doctest::Approx(0.05).epsilon(0.02));
  CHECK(a.event->v_before == doctest::Approx(0.005));
}

TEST_CASE("trial reverts and downscales a slower upscale") {
  auto t = run_trial(small_cfg(), 9.7, -0.02);
  const auto& a = t.actions.back();
  REQUIRE(a.kind == ActionKind::RevertAndDownscale);
  CHECK(a.restore_checkpoint == t.actions[1].take_checkpoint);
  CHECK(t.controller.state().scale == 0.5);
  CHECK(t.controller.state().phase == Phase::Monitoring);
  CHECK(t.controller.state().adjustment_count == 1);
}

TEST_CASE("trial reverts only on a velocity tie") {
  auto t = run_trial(small_cfg(), 9.7, 0.005);
  const auto& a = t.actions.back();
  REQUIRE(a.kind == ActionKind::RevertOnly);
  CHECK(a.restore_checkpoint);
  CHECK(t.controller.state().scale == 1.0);
  CHECK(t.controller.state().adjustment_count == 1);
}

TEST_CASE("trial with no comparable window falls back to history extremes") {
  // Validation mean far below everything seen: keep.
  auto t = run_trial(small_cfg(), 1.0, 0.0);
  CHECK(t.actions.back().kind == ActionKind::KeepUpscale);
  // Far above: downscale.
  t = run_trial(small_cfg(), 50.0, 0.0, 5.0);
  CHECK(t.actions.back().kind == ActionKind::RevertAndDownscale);
}

TEST_CASE("ramp stops early when the loss exceeds history") {
  auto cfg = small_cfg();
  Controller c(cfg, 10000);
  std::int64_t step = 0;
  feed_line(c, step, 10, 10.0, 0.01);
  REQUIRE(feed_line(c, step, 10, 9.8, 0.005).kind == ActionKind::BeginTrialUpscale);
  c.observe(step++, 9.7);
  c.observe(step++, 9.6);
  const double used = c.multiplier();
  c.observe(step++, 11.0);
  CHECK(c.state().phase == Phase::Validating);
  CHECK(c.state().ramp_stopped_early);
  CHECK(c.multiplier() == used);
  CHECK(used < 3.0);
}

TEST_CASE("backtracking disabled: no checkpoints, scale still changes") {
  auto cfg = small_cfg();
  cfg.backtracking_enabled = false;
  auto t = run_trial(cfg, 9.7, -0.02);
  CHECK_FALSE(t.actions[1].take_checkpoint);
  CHECK_FALSE(t.actions.back().restore_checkpoint);
  CHECK(t.controller.state().scale == 0.5);
}

TEST_CASE("abort during a trial reverts and downscales") {
  Controller c(small_cfg(), 10000);
  std::int64_t step = 0;
  feed_line(c, step, 10, 10.0, 0.01);
  const auto begin = feed_line(c, step, 10, 9.8, 0.005);
  c.observe(step++, 9.7);
  const auto a = c.abort_trial(step);
  CHECK(a.kind == ActionKind::RevertAndDownscale);
  CHECK(a.restore_checkpoint == begin.take_checkpoint);
  CHECK_FALSE(a.event->v_after);
  CHECK(c.state().scale == 0.5);
}

TEST_CASE("no trial starts if it cannot finish in range") {
  auto cfg = small_cfg();
  cfg.search_end_ratio = 0.035;  // t_end = 35
  Controller c(cfg, 1000);
  std::int64_t step = 0;
  feed_line(c, step, 10, 10.0, 0.01);
  // Triggers at step 19, and 19 + 20 >= 35.
  CHECK(feed_line(c, step, 10, 9.8, 0.005).kind == ActionKind::Continue);
  CHECK(c.state().phase == Phase::Monitoring);
}

TEST_CASE("closed-loop invariants on a noisy quadratic") {
  QuadraticConfig qc;
  qc.noise_std = 0.1;
  qc.init_scale = 1e30;
  qc.seed = 3;
  QuadraticOracle oracle(qc);
  auto cfg = small_cfg(50);
  cfg.search_end_ratio = 0.8;
  const std::int64_t total = 6000;
  Controller c(cfg, total);

  std::vector<Checkpoint> store;
  double theta_prev = cfg.theta0;
  std::int64_t count_prev = 0;
  for (std::int64_t step = 0; step < total; ++step) {
    double loss;
    try {
      loss = oracle.step(1e-3 * c.multiplier());
    } catch (const DivergedError&) {
      c.abort_trial(step);
      oracle.restore(store.back());
      continue;
    }
    const auto a = c.observe(step, loss);
    if (a.take_checkpoint) store.push_back(oracle.snapshot());
    if (a.restore_checkpoint) oracle.restore(store.back());

    const auto& st = c.state();
    if (st.adjustment_count == count_prev) {
      CHECK(st.theta >= theta_prev);
      CHECK(st.theta < 1.0);
    } else {
      CHECK(st.theta == cfg.theta0);
    }
    theta_prev = st.theta;
    count_prev = st.adjustment_count;
  }

  const auto& events = c.events();
  REQUIRE(!events.empty());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto f = rectified_factors(cfg, static_cast<std::int64_t>(i));
    const auto& ev = events[i];
    CHECK(ev.step >= c.search_start());
    CHECK(ev.step < c.search_end());
    if (i > 0) CHECK(ev.old_scale == events[i - 1].new_scale);
    switch (ev.kind) {
      case EventKind::UpscaleKept:
        CHECK(ev.new_scale == ev.old_scale * f.alpha_prime);
        break;
      case EventKind::UpscaleRevertedThenDownscale:
      case EventKind::BoundaryDownscale:
        CHECK(ev.new_scale == ev.old_scale / f.beta_prime_inv);
        break;
      case EventKind::RevertOnly:
        CHECK(ev.new_scale == ev.old_scale);
        break;
    }
  }
}

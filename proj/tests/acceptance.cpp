// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "caring/calibrate.hpp"
#include "caring/metrics.hpp"
#include "caring/report.hpp"
#include "caring/synth.hpp"
#include "oracles.hpp"

using namespace caring;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

SynthConfig synth_config(std::vector<double> sharpness, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_val = 5000;
  cfg.n_test = 5000;
  cfg.classes = 5;
  cfg.clusters = sharpness.size();
  cfg.sharpness = std::move(sharpness);
  cfg.margin.assign(cfg.clusters, 2.0);
  cfg.feature_dim = 16;
  cfg.feature_noise = 0.05;
  cfg.seed = seed;
  return cfg;
}

// Shared between criteria 3, 4 and 5 so the expensive fits run once.
struct Fitted {
  SynthData data;
  TemperatureCalibrator temperature;
  CaringModel caring;
  TrainingTrace caring_trace;
};

const Fitted& single_cluster() {
  static const Fitted f = [] {
    Fitted out{generate(synth_config({3.0}, 7)), {}, {}, {}};
    out.temperature = fit_temperature(out.data.val.set, FitConfig::temperature_defaults()).model;
    auto c = fit_caring(out.data.val.set, FitConfig::caring_defaults());
    out.caring = c.model;
    out.caring_trace = c.trace;
    return out;
  }();
  return f;
}

const Fitted& two_clusters() {
  static const Fitted f = [] {
    Fitted out{generate(synth_config({1.5, 4.0}, 7)), {}, {}, {}};
    out.temperature = fit_temperature(out.data.val.set, FitConfig::temperature_defaults()).model;
    auto c = fit_caring(out.data.val.set, FitConfig::caring_defaults());
    out.caring = c.model;
    out.caring_trace = c.trace;
    return out;
  }();
  return f;
}

Outcome ece_oracle() {
  Outcome o;
  Prng rng(1001);
  const std::size_t ks[] = {1, 5, 10, 15};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.next_below(50);
    const std::size_t m = 2 + rng.next_below(5);
    const std::size_t k = ks[rng.next_below(4)];
    Matrix logits(n, m);
    for (double& x : logits.data()) x = rng.normal(0.0, 1.0 + 4.0 * rng.next_unit());
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(rng.next_below(m));
    const Predictions pred = predict(confidences_identity(logits));
    std::vector<bool> correct;
    for (std::size_t i = 0; i < n; ++i) correct.push_back(pred.labels[i] == labels[i]);
    // Exact bin edges appear too, to exercise the boundary rule.
    std::vector<double> conf = pred.confidences;
    if (trial % 4 == 0) conf[0] = static_cast<double>(rng.next_below(k + 1)) / static_cast<double>(k);
    const double lib = ece(reliability_bins(conf, correct, k), n);
    const double ref = oracle::brute_force_ece(conf, correct, k);
    worst = std::max(worst, std::fabs(lib - ref));
  }
  o.require(worst <= 1e-12, fmt::format("max |ece - oracle| = {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("max |ece - oracle| = {:.3g}", worst);
  return o;
}

Outcome gradients() {
  Outcome o;
  Prng rng(2002);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.next_below(20);
    const std::size_t m = 2 + rng.next_below(5);
    Matrix logits(n, m);
    for (double& x : logits.data()) x = rng.normal(0.0, 3.0);
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(rng.next_below(m));
    const double tau = rng.uniform(0.3, 4.0);
    const double analytic = nll_grad_tau(logits, labels, tau).d_tau;
    const double numeric =
        oracle::central_difference([&](double t) { return nll_grad_tau(logits, labels, t).nll; }, tau);
    worst = std::max(worst, oracle::relative_error(analytic, numeric));
  }
  o.require(worst < 1e-4, fmt::format("tau gradient relative error {:.3g}", worst));

  double worst_caring = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10;
    const std::size_t m = 2 + rng.next_below(4);
    const std::size_t d = 1 + rng.next_below(6);
    const std::size_t h = 1 + rng.next_below(8);
    SampleSet s;
    s.logits = Matrix(n, m);
    s.features = Matrix(n, d);
    for (double& x : s.logits.data()) x = rng.normal(0.0, 3.0);
    for (double& x : s.features->data()) x = rng.normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) s.labels.push_back(rng.next_below(m));
    CaringModel model = CaringModel::zeros(h, d);
    for (double& w : model.w1.data()) w = rng.normal(0.0, 0.7);
    for (double& b : model.b1) b = rng.normal(0.0, 0.3);
    for (double& w : model.w2) w = rng.normal(0.0, 0.7);
    model.b2 = rng.uniform(0.2, 1.0);

    const CaringGradient g = caring_nll_grad(s.logits, *s.features, s.labels, model);
    std::vector<std::pair<double*, double>> params;
    for (std::size_t k = 0; k < model.w1.data().size(); ++k) params.emplace_back(&model.w1.data()[k], g.w1.data()[k]);
    for (std::size_t k = 0; k < h; ++k) {
      params.emplace_back(&model.b1[k], g.b1[k]);
      params.emplace_back(&model.w2[k], g.w2[k]);
    }
    params.emplace_back(&model.b2, g.b2);
    for (auto [param, analytic] : params) {
      const double saved = *param;
      const double numeric = oracle::central_difference(
          [&](double v) {
            *param = v;
            const double loss = nll(model, s);
            *param = saved;
            return loss;
          },
          saved);
      worst_caring = std::max(worst_caring, oracle::relative_error(analytic, numeric));
    }
  }
  o.require(worst_caring < 1e-4, fmt::format("CARING gradient relative error {:.3g}", worst_caring));
  if (o.pass) o.detail = fmt::format("max relative error: tau {:.3g}, CARING {:.3g}", worst, worst_caring);
  return o;
}

Outcome accuracy_invariance() {
  Outcome o;
  std::vector<std::pair<const SampleSet*, std::vector<Calibrator>>> cases;
  for (const Fitted* f : {&single_cluster(), &two_clusters()}) {
    for (const SampleSet* s : {&f->data.val.set, &f->data.test.set}) {
      cases.push_back({s, {f->temperature, f->caring}});
    }
  }
  std::size_t checked = 0;
  for (const auto& [set, calibrators] : cases) {
    const CalibrationReport raw = full_report(*set, IdentityCalibrator{});
    for (const Calibrator& c : calibrators) {
      const CalibrationReport cal = full_report(*set, c);
      o.require(cal.accuracy == raw.accuracy,
                fmt::format("accuracy {} != {} under {}", cal.accuracy, raw.accuracy, calibrator_kind(c)));
      const Matrix probs = calibrated_probs(c, *set);
      for (std::size_t i = 0; i < set->size(); ++i) {
        for (std::size_t a = 0; a < set->num_classes(); ++a) {
          for (std::size_t b = 0; b < set->num_classes(); ++b) {
            const double ya = set->logits(i, a);
            const double yb = set->logits(i, b);
            if (ya > yb) o.require(probs(i, a) >= probs(i, b), fmt::format("ranking changed at sample {}", i));
            if (ya == yb) o.require(probs(i, a) == probs(i, b), fmt::format("tie broken at sample {}", i));
          }
        }
      }
      ++checked;
    }
  }
  if (o.pass) o.detail = fmt::format("{} dataset/calibrator pairs", checked);
  return o;
}

Outcome global_recovery() {
  Outcome o;
  const Fitted& f = single_cluster();
  const double tau = f.temperature.tau;
  const double raw = full_report(f.data.test.set, IdentityCalibrator{}).ece;
  const double cal = full_report(f.data.test.set, f.temperature).ece;
  const double drop = 1.0 - cal / raw;
  o.require(tau >= 2.25 && tau <= 3.75, fmt::format("tau = {:.4f} outside [2.25, 3.75]", tau));
  o.require(drop >= 0.6, fmt::format("ECE drop {:.1f}% < 60%", 100.0 * drop));
  o.detail = fmt::format("tau = {:.4f}, test ECE {:.4f} -> {:.4f} ({:.1f}% drop)", tau, raw, cal, 100.0 * drop);
  return o;
}

Outcome input_dependence() {
  Outcome o;
  const Fitted& f = two_clusters();
  const SampleSet& test = f.data.test.set;
  const double e_id = full_report(test, IdentityCalibrator{}).ece;
  const double e_ts = full_report(test, f.temperature).ece;
  const double e_car = full_report(test, f.caring).ece;
  o.require(e_car <= e_ts, fmt::format("CARING ECE {:.4f} > temperature ECE {:.4f}", e_car, e_ts));
  o.require(e_ts < e_id && e_car < e_id, "calibrated ECE not below identity");

  const Vector temps = sample_temperatures(f.caring, f.data.val.set);
  double sum = 0.0;
  for (double t : temps) sum += t;
  const double mean = sum / static_cast<double>(temps.size());
  double sq = 0.0;
  for (double t : temps) sq += (t - mean) * (t - mean);
  const double std_t = std::sqrt(sq / static_cast<double>(temps.size()));
  o.require(std_t > 0.1, fmt::format("std_T = {:.4f} <= 0.1", std_t));

  double cluster_sum[2] = {0.0, 0.0};
  double cluster_n[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < temps.size(); ++i) {
    cluster_sum[f.data.val.cluster[i]] += temps[i];
    cluster_n[f.data.val.cluster[i]] += 1.0;
  }
  const double t0 = cluster_sum[0] / cluster_n[0];
  const double t1 = cluster_sum[1] / cluster_n[1];
  o.require(t0 < t1, fmt::format("cluster mean T not ordered: {:.4f} vs {:.4f}", t0, t1));
  o.detail = fmt::format("ECE identity {:.4f}, temperature {:.4f}, CARING {:.4f}; std_T {:.4f}; mean T {:.3f} < {:.3f}",
                         e_id, e_ts, e_car, std_t, t0, t1);
  return o;
}

Outcome limits() {
  Outcome o;
  Prng rng(6006);
  double worst_flat = 0.0;
  double worst_zero = 0.0;
  double worst_const = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.next_below(20);
    const std::size_t m = 2 + rng.next_below(9);
    const std::size_t d = 1 + rng.next_below(8);
    Matrix logits(n, m);
    for (double& x : logits.data()) x = rng.uniform(-50.0, 50.0);
    Matrix features(n, d);
    for (double& x : features.data()) x = rng.normal(0.0, 2.0);

    const Matrix flat = confidences_temperature(logits, 1e6);
    for (double p : flat.data()) {
      worst_flat = std::max(worst_flat, std::fabs(p - 1.0 / static_cast<double>(m)));
    }
    const Matrix identity = confidences_identity(logits);
    const Matrix zero = confidences_caring(logits, features, CaringModel::zeros(1 + rng.next_below(16), d));
    for (std::size_t k = 0; k < identity.data().size(); ++k) {
      worst_zero = std::max(worst_zero, std::fabs(zero.data()[k] - identity.data()[k]));
    }
    const double c = rng.uniform(0.0, 5.0);
    CaringModel constant = CaringModel::zeros(4, d);
    for (double& w : constant.w1.data()) w = rng.normal(0.0, 1.0);
    for (double& b : constant.b1) b = rng.normal(0.0, 1.0);
    constant.b2 = c;
    const Matrix pc = confidences_caring(logits, features, constant);
    const Matrix pt = confidences_temperature(logits, 1.0 + c);
    for (std::size_t k = 0; k < pc.data().size(); ++k) {
      worst_const = std::max(worst_const, std::fabs(pc.data()[k] - pt.data()[k]));
    }
  }
  o.require(worst_flat <= 1e-4, fmt::format("tau = 1e6 deviates {:.3g} from uniform", worst_flat));
  o.require(worst_zero <= 1e-12, fmt::format("zero CARING deviates {:.3g} from identity", worst_zero));
  o.require(worst_const <= 1e-12, fmt::format("constant CARING deviates {:.3g} from temperature", worst_const));
  if (o.pass) {
    o.detail = fmt::format("max deviations: uniform {:.3g}, identity {:.3g}, temperature {:.3g}", worst_flat,
                           worst_zero, worst_const);
  }
  return o;
}

Outcome bounds() {
  Outcome o;
  Prng rng(7007);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.next_below(50);
    const std::size_t m = 2 + rng.next_below(5);
    SampleSet s;
    s.logits = Matrix(n, m);
    for (double& x : s.logits.data()) x = rng.normal(0.0, 1.0 + 10.0 * rng.next_unit());
    for (std::size_t i = 0; i < n; ++i) s.labels.push_back(rng.next_below(m));
    const CalibrationReport r = full_report(s, IdentityCalibrator{}, 1 + rng.next_below(20));
    o.require(r.ece >= 0.0 && r.ece <= 1.0, fmt::format("ECE {} out of [0, 1]", r.ece));
    o.require(r.brier >= 0.0 && r.brier <= 1.0, fmt::format("Brier {} out of [0, 1]", r.brier));
    o.require(r.nll >= 0.0, fmt::format("NLL {} negative", r.nll));
    const CalibrationReport k1 = full_report(s, IdentityCalibrator{}, 1);
    o.require(k1.ece == std::fabs(k1.accuracy - k1.mean_confidence), "K = 1 ECE is not |accuracy - confidence|");
  }
  const Matrix onehot(3, 3, {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
  const std::vector<std::size_t> right{0, 1, 2};
  const std::vector<std::size_t> wrong{1, 2, 0};
  o.require(brier(onehot, right) == 0.0, "Brier of one-hot-correct is not 0");
  o.require(brier(onehot, wrong) == 1.0, "Brier of one-hot-wrong is not 1");
  if (o.pass) o.detail = "1000 random instances plus one-hot extremes";
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool run(const std::string& args) {
  const std::string cmd = std::string("\"") + CARING_CLI_PATH + "\" " + args + " >/dev/null";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) && WEXITSTATUS(raw) == 0;
}

Outcome determinism() {
  Outcome o;
  oracle::TempDir a("accept-a");
  oracle::TempDir b("accept-b");
  for (const oracle::TempDir* dir : {&a, &b}) {
    const std::string d = "\"" + dir->path().string() + "\"";
    const bool ok =
        run("synth --seed 7 --n-val 2000 --n-test 2000 --clusters 2 --sharpness 1.5,4 --margin 2,2 --out " + d) &&
        run("fit-caring --val " + d + "/val/manifest.json --seed 3 --out " + d + "/model.json") &&
        run("metrics --data " + d + "/test/manifest.json --model " + d + "/model.json --out " + d + "/report.json") &&
        run("report --metrics " + d + "/report.json --reliability " + d + "/reliability.svg --histogram " + d +
            "/histogram.svg --classes " + d + "/classes.csv");
    o.require(ok, "pipeline command failed");
  }
  for (const char* name : {"model.json", "report.json", "reliability.svg", "histogram.svg", "classes.csv"}) {
    const std::string x = slurp(a / name);
    o.require(!x.empty() && x == slurp(b / name), fmt::format("{} differs between runs", name));
  }
  if (o.pass) o.detail = "model, report, SVGs and class table byte-identical";
  return o;
}

Outcome reliability_svg() {
  Outcome o;
  CalibrationReport r;
  r.bins = {{0.0, 0.5, 10, 0.35, 0.2}, {0.5, 1.0, 10, 0.95, 0.9}};
  r.n_total = 20;
  r.ece = ece(r.bins, r.n_total);
  const std::string svg = render_reliability_svg(r);
  const PlotArea area = plot_area(DiagramStyle{});

  // Pull y/height from the two bar rects.
  std::vector<std::pair<double, double>> bars;
  std::size_t pos = 0;
  while ((pos = svg.find("class=\"bar\"", pos)) != std::string::npos) {
    const std::size_t end = svg.find("/>", pos);
    const std::string tag = svg.substr(pos, end - pos);
    auto attr = [&](const std::string& key) {
      const std::size_t at = tag.find(" " + key + "=\"") + key.size() + 3;
      return std::stod(tag.substr(at, tag.find('"', at) - at));
    };
    bars.emplace_back(attr("y"), attr("height"));
    pos = end;
  }
  o.require(bars.size() == 2, fmt::format("{} bars rendered", bars.size()));
  if (bars.size() == 2) {
    const double acc[2] = {0.2, 0.9};
    for (int i = 0; i < 2; ++i) {
      o.require(std::fabs(bars[i].second - acc[i] * area.height) <= 1.0,
                fmt::format("bar {} height {} != {}", i, bars[i].second, acc[i] * area.height));
    }
    const double diagonal_y = area.bottom() - 0.95 * area.height;
    o.require(bars[1].first > diagonal_y, "overconfident bar reaches above the diagonal");
    o.detail = fmt::format("heights {:.2f}, {:.2f} of {:.0f} px; bar top y {:.2f} below diagonal y {:.2f}",
                           bars[0].second, bars[1].second, area.height, bars[1].first, diagonal_y);
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ECE oracle equivalence", ece_oracle},
      {"gradient correctness", gradients},
      {"accuracy invariance", accuracy_invariance},
      {"global temperature recovery", global_recovery},
      {"input-dependent temperature", input_dependence},
      {"limit behavior", limits},
      {"metric bounds", bounds},
      {"pipeline determinism", determinism},
      {"reliability SVG", reliability_svg},
  };
  const auto start = std::chrono::steady_clock::now();
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(criteria.size()) - failed, criteria.size(), secs);
  return failed == 0 ? 0 : 1;
}

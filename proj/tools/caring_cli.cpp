// caring: command-line front end over the C API.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric failure.

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caring/caring.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct DatasetDeleter {
  void operator()(caring_dataset* p) const { caring_dataset_free(p); }
};
struct ModelDeleter {
  void operator()(caring_model* p) const { caring_model_free(p); }
};
struct TraceDeleter {
  void operator()(caring_trace* p) const { caring_trace_free(p); }
};
struct ReportDeleter {
  void operator()(caring_report* p) const { caring_report_free(p); }
};
using DatasetPtr = std::unique_ptr<caring_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<caring_model, ModelDeleter>;
using TracePtr = std::unique_ptr<caring_trace, TraceDeleter>;
using ReportPtr = std::unique_ptr<caring_report, ReportDeleter>;

// Thrown to unwind a subcommand with an already-reported failure.
struct Failure {
  int exit_code;
};

void check(caring_status status) {
  if (status == CARING_OK) return;
  std::cerr << "error: " << caring_last_error() << '\n';
  throw Failure{status == CARING_ERR_NUMERIC ? kExitNumeric : kExitData};
}

DatasetPtr load_dataset(const std::string& manifest) {
  caring_dataset* raw = nullptr;
  check(caring_dataset_load(manifest.c_str(), &raw));
  return DatasetPtr(raw);
}

ModelPtr load_model(const std::string& path) {
  caring_model* raw = nullptr;
  check(caring_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

struct SynthOptions {
  caring_synth_config cfg{};
  std::vector<double> sharpness{1.0};
  std::vector<double> margin{2.0};
  std::string out;
};

struct MetricsOptions {
  std::string data;
  std::string model;
  std::size_t bins = 10;
  std::string out;
};

struct FitOptions {
  caring_fit_config cfg{};
  std::string val;
  std::string out;
  std::string trace;
};

struct ApplyOptions {
  std::string data;
  std::string model;
  std::string out;
};

struct ReportOptions {
  std::string metrics;
  std::string reliability;
  std::string histogram;
  std::string classes;
  std::size_t hist_bins = 20;
};

int run_synth(SynthOptions& o) {
  o.cfg.sharpness = o.sharpness.data();
  o.cfg.margin = o.margin.data();
  if (o.sharpness.size() != o.cfg.clusters || o.margin.size() != o.cfg.clusters) {
    std::cerr << "error: --sharpness and --margin need one value per cluster (" << o.cfg.clusters << ")\n";
    return kExitUsage;
  }
  check(caring_synth_write(&o.cfg, o.out.c_str()));
  return kExitOk;
}

int run_metrics(const MetricsOptions& o) {
  DatasetPtr ds = load_dataset(o.data);
  ModelPtr model = o.model.empty() ? nullptr : load_model(o.model);
  caring_report* raw = nullptr;
  check(caring_report_compute(ds.get(), model.get(), o.bins, &raw));
  ReportPtr report(raw);
  check(caring_report_save(report.get(), o.out.c_str()));
  return kExitOk;
}

int run_fit(const FitOptions& o, bool caring) {
  DatasetPtr ds = load_dataset(o.val);
  caring_model* raw_model = nullptr;
  caring_trace* raw_trace = nullptr;
  check(caring ? caring_fit_caring(ds.get(), &o.cfg, &raw_model, &raw_trace)
               : caring_fit_temperature(ds.get(), &o.cfg, &raw_model, &raw_trace));
  ModelPtr model(raw_model);
  TracePtr trace(raw_trace);
  check(caring_model_save(model.get(), o.out.c_str()));
  if (!o.trace.empty()) check(caring_trace_write_csv(trace.get(), o.trace.c_str()));
  return kExitOk;
}

int run_apply(const ApplyOptions& o) {
  DatasetPtr ds = load_dataset(o.data);
  ModelPtr model = load_model(o.model);
  check(caring_apply_write(ds.get(), model.get(), o.out.c_str()));
  return kExitOk;
}

int run_report(const ReportOptions& o) {
  caring_report* raw = nullptr;
  check(caring_report_load(o.metrics.c_str(), &raw));
  ReportPtr report(raw);
  check(caring_render_reliability(report.get(), o.reliability.c_str()));
  if (!o.histogram.empty()) check(caring_render_histogram(report.get(), o.hist_bins, o.histogram.c_str()));
  if (!o.classes.empty()) check(caring_render_class_table(report.get(), o.classes.c_str()));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-hoc confidence calibration: metrics, temperature scaling and CARING", "caring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", caring_version());

  SynthOptions synth;
  caring_synth_config_default(&synth.cfg);
  synth.cfg.n_val = 5000;
  synth.cfg.n_test = 5000;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic val/test pair with known miscalibration");
  synth_cmd->add_option("--seed", synth.cfg.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--n-val", synth.cfg.n_val, "Validation samples")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--n-test", synth.cfg.n_test, "Test samples")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--classes", synth.cfg.classes, "Number of classes")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  synth_cmd->add_option("--clusters", synth.cfg.clusters, "Number of input clusters")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--sharpness", synth.sharpness, "Per-cluster logit sharpening (comma list, >= 1)")->delimiter(',');
  synth_cmd->add_option("--margin", synth.margin, "Per-cluster true-class margin (comma list)")->delimiter(',');
  synth_cmd->add_option("--feature-dim", synth.cfg.feature_dim, "Feature vector length")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--feature-noise", synth.cfg.feature_noise, "Feature noise std")->check(CLI::NonNegativeNumber)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  MetricsOptions metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "Compute ECE, Brier, NLL, accuracy and reliability bins");
  metrics_cmd->add_option("--data", metrics.data, "Dataset manifest")->required();
  metrics_cmd->add_option("--model", metrics.model, "Calibrator model file (raw softmax if omitted)");
  metrics_cmd->add_option("--bins", metrics.bins, "Reliability bins")->check(CLI::PositiveNumber)->capture_default_str();
  metrics_cmd->add_option("--out", metrics.out, "Report JSON")->required();

  FitOptions fit_temp;
  caring_fit_config_temperature_default(&fit_temp.cfg);
  auto* fit_temp_cmd = app.add_subcommand("fit-temp", "Fit a global temperature on a validation set");
  fit_temp_cmd->add_option("--val", fit_temp.val, "Validation manifest")->required();
  fit_temp_cmd->add_option("--lr", fit_temp.cfg.lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  fit_temp_cmd->add_option("--epochs", fit_temp.cfg.epochs, "Epochs")->check(CLI::PositiveNumber)->capture_default_str();
  fit_temp_cmd->add_option("--batch", fit_temp.cfg.batch_size, "Mini-batch size (0 = full batch)")->capture_default_str();
  fit_temp_cmd->add_option("--seed", fit_temp.cfg.seed, "Shuffling seed")->capture_default_str();
  fit_temp_cmd->add_option("--out", fit_temp.out, "Model JSON")->required();
  fit_temp_cmd->add_option("--trace", fit_temp.trace, "Per-epoch trace CSV");

  FitOptions fit_caring;
  caring_fit_config_caring_default(&fit_caring.cfg);
  auto* fit_caring_cmd = app.add_subcommand("fit-caring", "Fit the input-conditioned temperature network");
  fit_caring_cmd->add_option("--val", fit_caring.val, "Validation manifest (with features)")->required();
  fit_caring_cmd->add_option("--hidden", fit_caring.cfg.hidden, "Hidden units")->check(CLI::PositiveNumber)->capture_default_str();
  fit_caring_cmd->add_option("--lr", fit_caring.cfg.lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  fit_caring_cmd->add_option("--wd", fit_caring.cfg.weight_decay, "Weight decay on weight matrices")->check(CLI::NonNegativeNumber)->capture_default_str();
  fit_caring_cmd->add_option("--epochs", fit_caring.cfg.epochs, "Epochs")->check(CLI::PositiveNumber)->capture_default_str();
  fit_caring_cmd->add_option("--batch", fit_caring.cfg.batch_size, "Mini-batch size (0 = full batch)")->capture_default_str();
  fit_caring_cmd->add_option("--seed", fit_caring.cfg.seed, "Initialization and shuffling seed")->capture_default_str();
  fit_caring_cmd->add_option("--out", fit_caring.out, "Model JSON")->required();
  fit_caring_cmd->add_option("--trace", fit_caring.trace, "Per-epoch trace CSV");

  ApplyOptions apply;
  auto* apply_cmd = app.add_subcommand("apply", "Write calibrated probabilities");
  apply_cmd->add_option("--data", apply.data, "Dataset manifest")->required();
  apply_cmd->add_option("--model", apply.model, "Calibrator model file")->required();
  apply_cmd->add_option("--out", apply.out, "Probabilities CSV")->required();

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "Render diagrams and tables from a metrics report");
  report_cmd->add_option("--metrics", report.metrics, "Report JSON from `metrics`")->required();
  report_cmd->add_option("--reliability", report.reliability, "Reliability diagram SVG")->required();
  report_cmd->add_option("--histogram", report.histogram, "Confidence histogram SVG");
  report_cmd->add_option("--hist-bins", report.hist_bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();
  report_cmd->add_option("--classes", report.classes, "Per-class table (.csv, or .md for Markdown)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*metrics_cmd) return run_metrics(metrics);
    if (*fit_temp_cmd) return run_fit(fit_temp, false);
    if (*fit_caring_cmd) return run_fit(fit_caring, true);
    if (*apply_cmd) return run_apply(apply);
    if (*report_cmd) return run_report(report);
  } catch (const Failure& f) {
    return f.exit_code;
  }
  return kExitUsage;
}

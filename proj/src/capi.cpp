#include "caring/caring.h"

#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "caring/calibrate.hpp"
#include "caring/dataset.hpp"
#include "caring/error.hpp"
#include "caring/metrics.hpp"
#include "caring/report.hpp"
#include "caring/synth.hpp"

struct caring_dataset {
  caring::SampleSet set;
};

struct caring_model {
  caring::Calibrator calibrator;
};

struct caring_trace {
  caring::TrainingTrace trace;
};

struct caring_report {
  caring::CalibrationReport report;
};

namespace {

thread_local std::string g_last_error;

caring_status fail(caring_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
caring_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return CARING_OK;
  } catch (const caring::Error& e) {
    switch (e.kind()) {
      case caring::ErrorKind::InvalidArgument: return fail(CARING_ERR_INVALID_ARGUMENT, e.what());
      case caring::ErrorKind::Data: return fail(CARING_ERR_DATA, e.what());
      case caring::ErrorKind::Numeric: return fail(CARING_ERR_NUMERIC, e.what());
    }
    return fail(CARING_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CARING_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CARING_ERR_INTERNAL, e.what());
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw caring::InvalidArgument(fmt::format("{} must not be NULL", what));
}

caring::Calibrator calibrator_or_identity(const caring_model* model) {
  return model ? model->calibrator : caring::Calibrator{caring::IdentityCalibrator{}};
}

caring::FitConfig to_cpp(const caring_fit_config& c) {
  caring::FitConfig cfg;
  cfg.lr = c.lr;
  cfg.epochs = c.epochs;
  cfg.weight_decay = c.weight_decay;
  cfg.hidden = c.hidden;
  cfg.seed = c.seed;
  cfg.batch_size = c.batch_size;
  return cfg;
}

void from_cpp(const caring::FitConfig& cfg, caring_fit_config* out) {
  out->lr = cfg.lr;
  out->epochs = cfg.epochs;
  out->weight_decay = cfg.weight_decay;
  out->hidden = cfg.hidden;
  out->seed = cfg.seed;
  out->batch_size = cfg.batch_size;
}

void write_text(const char* path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw caring::DataError(fmt::format("{}: cannot open for writing", path));
  out << text;
  if (!out) throw caring::DataError(fmt::format("{}: write failed", path));
}

std::string read_text(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw caring::DataError(fmt::format("{}: missing file", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

extern "C" {

const char* caring_version(void) { return "1.0.0"; }

const char* caring_last_error(void) { return g_last_error.c_str(); }

caring_status caring_dataset_load(const char* manifest_path, caring_dataset** out) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out, "out");
    *out = new caring_dataset{caring::load_sampleset(manifest_path)};
  });
}

void caring_dataset_free(caring_dataset* ds) { delete ds; }

caring_status caring_dataset_shape(const caring_dataset* ds, size_t* n, size_t* m, size_t* d) {
  return guarded([&] {
    require(ds, "dataset");
    if (n) *n = ds->set.size();
    if (m) *m = ds->set.num_classes();
    if (d) *d = ds->set.feature_dim();
  });
}

caring_status caring_dataset_validate_pair(const caring_dataset* val, const caring_dataset* test) {
  return guarded([&] {
    require(val, "val");
    require(test, "test");
    caring::validate_pair(val->set, test->set);
  });
}

void caring_synth_config_default(caring_synth_config* cfg) {
  if (!cfg) return;
  static const double kOne = 1.0;
  static const double kTwo = 2.0;
  const caring::SynthConfig d;
  cfg->seed = d.seed;
  cfg->n_val = d.n_val;
  cfg->n_test = d.n_test;
  cfg->classes = d.classes;
  cfg->clusters = 1;
  cfg->sharpness = &kOne;
  cfg->margin = &kTwo;
  cfg->feature_dim = d.feature_dim;
  cfg->feature_noise = d.feature_noise;
}

caring_status caring_synth_write(const caring_synth_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    if (cfg->clusters > 0) {
      require(cfg->sharpness, "sharpness");
      require(cfg->margin, "margin");
    }
    caring::SynthConfig c;
    c.seed = cfg->seed;
    c.n_val = cfg->n_val;
    c.n_test = cfg->n_test;
    c.classes = cfg->classes;
    c.clusters = cfg->clusters;
    c.sharpness.assign(cfg->sharpness, cfg->sharpness + cfg->clusters);
    c.margin.assign(cfg->margin, cfg->margin + cfg->clusters);
    c.feature_dim = cfg->feature_dim;
    c.feature_noise = cfg->feature_noise;
    caring::write_synth(out_dir, caring::generate(c));
  });
}

void caring_fit_config_temperature_default(caring_fit_config* cfg) {
  if (cfg) from_cpp(caring::FitConfig::temperature_defaults(), cfg);
}

void caring_fit_config_caring_default(caring_fit_config* cfg) {
  if (cfg) from_cpp(caring::FitConfig::caring_defaults(), cfg);
}

caring_status caring_fit_temperature(const caring_dataset* val, const caring_fit_config* cfg, caring_model** model,
                                     caring_trace** trace) {
  return guarded([&] {
    require(val, "val");
    require(cfg, "cfg");
    require(model, "model");
    auto fit = caring::fit_temperature(val->set, to_cpp(*cfg));
    *model = new caring_model{fit.model};
    if (trace) *trace = new caring_trace{std::move(fit.trace)};
  });
}

caring_status caring_fit_caring(const caring_dataset* val, const caring_fit_config* cfg, caring_model** model,
                                caring_trace** trace) {
  return guarded([&] {
    require(val, "val");
    require(cfg, "cfg");
    require(model, "model");
    auto fit = caring::fit_caring(val->set, to_cpp(*cfg));
    *model = new caring_model{std::move(fit.model)};
    if (trace) *trace = new caring_trace{std::move(fit.trace)};
  });
}

size_t caring_trace_epochs(const caring_trace* trace) { return trace ? trace->trace.epochs.size() : 0; }

caring_status caring_trace_get(const caring_trace* trace, size_t index, double* train_nll, double* mean_t,
                               double* std_t) {
  return guarded([&] {
    require(trace, "trace");
    if (index >= trace->trace.epochs.size()) {
      throw caring::InvalidArgument(fmt::format("epoch index {} out of range", index));
    }
    const auto& e = trace->trace.epochs[index];
    if (train_nll) *train_nll = e.train_nll;
    if (mean_t) *mean_t = e.mean_t;
    if (std_t) *std_t = e.std_t;
  });
}

caring_status caring_trace_write_csv(const caring_trace* trace, const char* path) {
  return guarded([&] {
    require(trace, "trace");
    require(path, "path");
    caring::write_trace_csv(path, trace->trace);
  });
}

void caring_trace_free(caring_trace* trace) { delete trace; }

caring_status caring_model_identity(caring_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = new caring_model{caring::IdentityCalibrator{}};
  });
}

caring_status caring_model_temperature(double tau, caring_model** out) {
  return guarded([&] {
    require(out, "out");
    if (!(tau >= caring::kMinTemperature)) {
      throw caring::InvalidArgument(fmt::format("tau must be >= {}, got {}", caring::kMinTemperature, tau));
    }
    *out = new caring_model{caring::TemperatureCalibrator{tau}};
  });
}

caring_status caring_model_load(const char* path, caring_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new caring_model{caring::load_model(path)};
  });
}

caring_status caring_model_save(const caring_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    caring::save_model(model->calibrator, path);
  });
}

caring_model_kind caring_model_get_kind(const caring_model* model) {
  if (!model) return CARING_MODEL_IDENTITY;
  return static_cast<caring_model_kind>(model->calibrator.index());
}

caring_status caring_model_tau(const caring_model* model, double* tau) {
  return guarded([&] {
    require(model, "model");
    require(tau, "tau");
    const auto* t = std::get_if<caring::TemperatureCalibrator>(&model->calibrator);
    if (!t) throw caring::InvalidArgument("model is not a temperature model");
    *tau = t->tau;
  });
}

caring_status caring_model_sample_temperature(const caring_model* model, const double* z, size_t len, double* t) {
  return guarded([&] {
    require(model, "model");
    require(t, "t");
    if (const auto* c = std::get_if<caring::CaringModel>(&model->calibrator)) {
      require(z, "z");
      *t = caring::caring_temperature(std::span<const double>(z, len), *c);
    } else if (const auto* temp = std::get_if<caring::TemperatureCalibrator>(&model->calibrator)) {
      *t = temp->tau;
    } else {
      *t = 1.0;
    }
  });
}

void caring_model_free(caring_model* model) { delete model; }

caring_status caring_apply_write(const caring_dataset* ds, const caring_model* model, const char* probs_path) {
  return guarded([&] {
    require(ds, "dataset");
    require(probs_path, "probs_path");
    const caring::Calibrator c = calibrator_or_identity(model);
    const caring::Matrix probs = caring::calibrated_probs(c, ds->set);
    const caring::Vector temps = caring::sample_temperatures(c, ds->set);
    const std::size_t m = probs.cols();

    caring::Matrix out(probs.rows(), m + 1);
    std::vector<std::string> header;
    for (std::size_t j = 0; j < m; ++j) header.push_back(fmt::format("p_{}", j));
    header.emplace_back("T");
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      for (std::size_t j = 0; j < m; ++j) out(i, j) = probs(i, j);
      out(i, m) = temps[i];
    }
    caring::write_matrix_csv(probs_path, out, header);
  });
}

caring_status caring_report_compute(const caring_dataset* ds, const caring_model* model, size_t bins,
                                    caring_report** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    *out = new caring_report{caring::full_report(ds->set, calibrator_or_identity(model), bins)};
  });
}

caring_status caring_report_load(const char* path, caring_report** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new caring_report{caring::report_from_json(read_text(path))};
  });
}

caring_status caring_report_save(const caring_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    require(path, "path");
    write_text(path, caring::report_to_json(report->report));
  });
}

caring_status caring_report_metrics(const caring_report* report, double* ece, double* brier, double* nll,
                                    double* accuracy) {
  return guarded([&] {
    require(report, "report");
    if (ece) *ece = report->report.ece;
    if (brier) *brier = report->report.brier;
    if (nll) *nll = report->report.nll;
    if (accuracy) *accuracy = report->report.accuracy;
  });
}

void caring_report_free(caring_report* report) { delete report; }

caring_status caring_render_reliability(const caring_report* report, const char* svg_path) {
  return guarded([&] {
    require(report, "report");
    require(svg_path, "svg_path");
    write_text(svg_path, caring::render_reliability_svg(report->report));
  });
}

caring_status caring_render_histogram(const caring_report* report, size_t bins, const char* svg_path) {
  return guarded([&] {
    require(report, "report");
    require(svg_path, "svg_path");
    const auto& r = report->report;
    if (r.confidences.empty()) throw caring::DataError("report carries no per-sample confidences");
    caring::HistogramMarkers markers{r.mean_confidence, r.accuracy};
    write_text(svg_path, caring::render_histogram_svg(r.confidences, bins, markers));
  });
}

caring_status caring_render_class_table(const caring_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    require(path, "path");
    const bool markdown = ends_with(path, ".md");
    write_text(path, markdown ? caring::render_class_markdown(report->report)
                              : caring::render_class_table(report->report));
  });
}

}  // extern "C"

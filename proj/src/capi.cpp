#include "shotvalue/shotvalue.h"

#include <cstring>
#include <string>

#include "shotvalue/error.hpp"
#include "shotvalue/esv.hpp"
#include "shotvalue/persist.hpp"
#include "shotvalue/pipeline.hpp"

using namespace shotvalue;

struct sv_config {
  PipelineConfig config;
};

struct sv_mixture {
  MixtureRecord record;
};

struct sv_outcome {
  OutcomeRecord record;
};

struct sv_observations {
  ObservationSet set;
};

namespace {

thread_local std::string last_error;

sv_status fail(sv_status status, const char* message) {
  last_error = message;
  return status;
}

template <class F>
sv_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return SV_OK;
  } catch (const InvalidArgument& e) {
    return fail(SV_INVALID_ARGUMENT, e.what());
  } catch (const ParseError& e) {
    return fail(SV_PARSE_ERROR, e.what());
  } catch (const ConfigError& e) {
    return fail(SV_CONFIG_ERROR, e.what());
  } catch (const IoError& e) {
    return fail(SV_IO_ERROR, e.what());
  } catch (const NumericError& e) {
    return fail(SV_NUMERIC_ERROR, e.what());
  } catch (const GeometryError& e) {
    return fail(SV_GEOMETRY_ERROR, e.what());
  } catch (const NotFound& e) {
    return fail(SV_NOT_FOUND, e.what());
  } catch (const std::exception& e) {
    return fail(SV_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(SV_INTERNAL_ERROR, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw InvalidArgument(std::string(what) + " is null");
}

ShotContext to_context(const sv_shot_context* c) {
  require(c, "context");
  if (c->shot_type < 0 || c->shot_type > 2) throw InvalidArgument("shot_type must be 0, 1 or 2");
  ShotContext ctx;
  ctx.shot_type = static_cast<ShotType>(c->shot_type);
  ctx.flag = c->one_bounce ? BounceFlag::one_bounce : BounceFlag::no_bounce;
  ctx.receiver_hand = c->receiver_left ? Handedness::left : Handedness::right;
  if (c->horizon > 0) ctx.horizon = c->horizon;
  return ctx;
}

}  // namespace

extern "C" {

const char* sv_last_error(void) { return last_error.c_str(); }

const char* sv_status_name(sv_status status) {
  switch (status) {
    case SV_OK: return "ok";
    case SV_INVALID_ARGUMENT: return "invalid argument";
    case SV_PARSE_ERROR: return "parse error";
    case SV_CONFIG_ERROR: return "config error";
    case SV_IO_ERROR: return "i/o error";
    case SV_NUMERIC_ERROR: return "numeric error";
    case SV_GEOMETRY_ERROR: return "geometry error";
    case SV_NOT_FOUND: return "not found";
    case SV_INTERNAL_ERROR: return "internal error";
  }
  return "unknown status";
}

const char* sv_version(void) { return "0.1.0"; }

sv_status sv_config_new(sv_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new sv_config{};
  });
}

sv_status sv_config_load(const char* path, sv_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new sv_config{load_pipeline_config_file(path)};
  });
}

sv_status sv_config_set(sv_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    PipelineConfig next = config->config;
    next.set(key, value);
    config->config = std::move(next);
  });
}

sv_status sv_config_path(const sv_config* config, const char* key, char* buf, size_t capacity) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(buf, "buf");
    if (capacity == 0) throw InvalidArgument("capacity is zero");
    const auto& c = config->config;
    const std::string k = key;
    std::string value;
    if (k == "out_dir") value = c.out_dir;
    else if (k == "tracking") value = c.tracking_path();
    else if (k == "metadata") value = c.metadata_path();
    else if (k == "model_dir") value = c.model_path();
    else throw InvalidArgument("not a path key: " + k);
    const size_t n = std::min(value.size(), capacity - 1);
    std::memcpy(buf, value.data(), n);
    buf[n] = '\0';
  });
}

void sv_config_free(sv_config* config) { delete config; }

sv_status sv_run(const sv_config* config, const char* command, sv_log_fn log, void* user) {
  return guard([&] {
    require(config, "config");
    require(command, "command");
    Logger logger;
    if (log) logger = [log, user](const std::string& line) { log(line.c_str(), user); };
    run_command(command, config->config, logger);
  });
}

sv_status sv_esv(const sv_config* config, const char* shot_id, double t, sv_estimate* out) {
  return guard([&] {
    require(config, "config");
    require(shot_id, "shot_id");
    require(out, "out");
    const auto e = cmd_esv(config->config, shot_id, t);
    *out = {e.mean, e.se, e.n, e.error_fraction};
  });
}

sv_status sv_mixture_load(const char* path, sv_mixture** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new sv_mixture{load_mixture(path)};
  });
}

int sv_mixture_dim(const sv_mixture* mixture) { return mixture ? mixture->record.model.dim() : 0; }

int sv_mixture_components(const sv_mixture* mixture) { return mixture ? mixture->record.model.size() : 0; }

sv_status sv_mixture_log_density(const sv_mixture* mixture, const double* x, size_t dim, double* out) {
  return guard([&] {
    require(mixture, "mixture");
    require(x, "x");
    require(out, "out");
    if (dim != static_cast<size_t>(mixture->record.model.dim())) throw InvalidArgument("dimension mismatch");
    *out = log_density(mixture->record.model, Eigen::Map<const Eigen::VectorXd>(x, static_cast<Eigen::Index>(dim)));
  });
}

sv_status sv_mixture_sample(const sv_mixture* mixture, size_t n, uint64_t seed, double* out) {
  return guard([&] {
    require(mixture, "mixture");
    require(out, "out");
    const Eigen::MatrixXd draws = sample(mixture->record.model, n, seed);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, draws.rows(),
                                                                                        draws.cols()) = draws;
  });
}

void sv_mixture_free(sv_mixture* mixture) { delete mixture; }

sv_status sv_outcome_load(const char* path, sv_outcome** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new sv_outcome{load_outcome(path)};
  });
}

size_t sv_outcome_features(const sv_outcome* model) { return model ? model->record.model.feature_names().size() : 0; }

const char* sv_outcome_feature_name(const sv_outcome* model, size_t i) {
  if (!model || i >= model->record.model.feature_names().size()) return nullptr;
  return model->record.model.feature_names()[i].c_str();
}

sv_status sv_outcome_predict(const sv_outcome* model, const double* features, size_t count, double* out) {
  return guard([&] {
    require(model, "model");
    require(features, "features");
    require(out, "out");
    if (count != model->record.model.feature_names().size()) throw InvalidArgument("feature count mismatch");
    *out = predict_win(model->record.model,
                       Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(features, static_cast<Eigen::Index>(count))));
  });
}

void sv_outcome_free(sv_outcome* model) { delete model; }

sv_status sv_observations_new(int dim, sv_observations** out) {
  return guard([&] {
    require(out, "out");
    if (dim < 1) throw InvalidArgument("dimension must be positive");
    *out = new sv_observations{ObservationSet(dim)};
  });
}

sv_status sv_observations_add(sv_observations* obs, const double* row, double value, double noise_var) {
  return guard([&] {
    require(obs, "observations");
    require(row, "row");
    obs->set.add({Eigen::Map<const Eigen::VectorXd>(row, obs->set.dim()), value, noise_var});
  });
}

sv_status sv_observations_add_unit(sv_observations* obs, int index, double value, double noise_var) {
  return guard([&] {
    require(obs, "observations");
    if (index < 0 || index >= obs->set.dim()) throw InvalidArgument("index out of range");
    obs->set.add_unit(index, value, noise_var);
  });
}

size_t sv_observations_size(const sv_observations* obs) { return obs ? obs->set.size() : 0; }

void sv_observations_free(sv_observations* obs) { delete obs; }

sv_status sv_esv_at(const sv_observations* obs, const sv_mixture* mixture, const sv_outcome* model,
                    const sv_shot_context* context, size_t n_samples, uint64_t seed, sv_estimate* out) {
  return guard([&] {
    require(obs, "observations");
    require(mixture, "mixture");
    require(model, "model");
    require(out, "out");
    McConfig mc;
    mc.n_samples = n_samples;
    mc.seed = seed;
    const auto e = esv_at(obs->set, mixture->record.model, model->record.model, to_context(context), mc);
    *out = {e.mean, e.se, e.n, e.error_fraction};
  });
}

sv_status sv_value_encoding(const double* encoding, size_t dim, const sv_shot_context* context,
                            const sv_outcome* model, double* out) {
  return guard([&] {
    require(encoding, "encoding");
    require(model, "model");
    require(out, "out");
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(encoding, static_cast<Eigen::Index>(dim));
    *out = value_encoding(v, to_context(context), model->record.model).value;
  });
}

}  // extern "C"

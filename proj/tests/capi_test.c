/* Exercises the C API from C: error codes, the pipeline and model handles. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "shotvalue/shotvalue.h"

static int failures = 0;

#define EXPECT(cond)                                                       \
  do {                                                                     \
    if (!(cond)) {                                                         \
      fprintf(stderr, "%s:%d: expected %s (%s)\n", __FILE__, __LINE__, #cond, sv_last_error()); \
      ++failures;                                                          \
    }                                                                      \
  } while (0)

static int lines_seen = 0;
static void count_line(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

int main(int argc, char** argv) {
  const char* dir = argc > 1 ? argv[1] : "capi_out";
  sv_config* config = NULL;
  sv_mixture* mixture = NULL;
  sv_outcome* outcome = NULL;
  sv_observations* obs = NULL;
  char path[1024];
  double value = 0.0;

  EXPECT(strcmp(sv_version(), "") != 0);
  EXPECT(sv_config_new(NULL) == SV_INVALID_ARGUMENT);
  EXPECT(strlen(sv_last_error()) > 0);
  EXPECT(sv_config_load("/nonexistent/shotvalue.conf", &config) == SV_IO_ERROR);
  EXPECT(strstr(sv_last_error(), "/nonexistent/shotvalue.conf") != NULL);

  EXPECT(sv_config_new(&config) == SV_OK);
  EXPECT(strcmp(sv_last_error(), "") == 0);
  EXPECT(sv_config_set(config, "no.such.key", "1") == SV_CONFIG_ERROR);
  EXPECT(sv_config_set(config, "seed", "twelve") == SV_CONFIG_ERROR);
  EXPECT(sv_config_set(config, "out_dir", dir) == SV_OK);
  EXPECT(sv_config_set(config, "seed", "12") == SV_OK);
  EXPECT(sv_config_set(config, "timestamp", "false") == SV_OK);
  EXPECT(sv_config_set(config, "synth.n_shots", "800") == SV_OK);
  EXPECT(sv_config_set(config, "mc.n_samples", "200") == SV_OK);
  EXPECT(sv_run(config, "no-such-command", NULL, NULL) == SV_INVALID_ARGUMENT);

  /* Nothing simulated yet: the tracking file is missing. */
  EXPECT(sv_config_set(config, "tracking", "/nonexistent/tracking.csv") == SV_OK);
  EXPECT(sv_run(config, "encode", NULL, NULL) == SV_IO_ERROR);
  EXPECT(strstr(sv_last_error(), "/nonexistent/tracking.csv") != NULL);
  EXPECT(sv_config_set(config, "tracking", "") == SV_OK);

  EXPECT(sv_run(config, "simulate", count_line, &lines_seen) == SV_OK);
  EXPECT(lines_seen == 1);
  EXPECT(sv_run(config, "encode", NULL, NULL) == SV_OK);
  EXPECT(sv_run(config, "fit-gmm", NULL, NULL) == SV_OK);
  EXPECT(sv_run(config, "fit-outcome", NULL, NULL) == SV_OK);

  sv_estimate early, late;
  EXPECT(sv_esv(config, "s000001", 0.1, &early) == SV_OK);
  EXPECT(sv_esv(config, "s000001", 0.6, &late) == SV_OK);
  EXPECT(early.n == 200 && early.mean >= 0.0 && early.mean <= 1.0);
  EXPECT(late.mean >= 0.0 && late.mean <= 1.0);
  EXPECT(sv_esv(config, "missing", 0.1, &early) == SV_NOT_FOUND);
  EXPECT(sv_esv(config, "s000001", -1.0, &early) == SV_INVALID_ARGUMENT);

  EXPECT(sv_config_path(config, "model_dir", path, sizeof path) == SV_OK);
  strncat(path, "/gmm_rally_one_bounce.json", sizeof path - strlen(path) - 1);
  EXPECT(sv_mixture_load(path, &mixture) == SV_OK);
  EXPECT(sv_mixture_dim(mixture) == 33);
  EXPECT(sv_mixture_components(mixture) >= 1);
  {
    double draws[2 * 33];
    EXPECT(sv_mixture_sample(mixture, 2, 3, draws) == SV_OK);
    EXPECT(sv_mixture_log_density(mixture, draws, 33, &value) == SV_OK);
    EXPECT(isfinite(value));
    EXPECT(sv_mixture_log_density(mixture, draws, 21, &value) == SV_INVALID_ARGUMENT);
  }

  EXPECT(sv_config_path(config, "model_dir", path, sizeof path) == SV_OK);
  strncat(path, "/outcome_rally.json", sizeof path - strlen(path) - 1);
  EXPECT(sv_outcome_load(path, &outcome) == SV_OK);
  EXPECT(sv_outcome_features(outcome) == 11);
  EXPECT(strcmp(sv_outcome_feature_name(outcome, 0), "impact_speed") == 0);
  EXPECT(sv_outcome_feature_name(outcome, 11) == NULL);
  {
    const double f[11] = {30, 22, 1.4, 1.0, 8.0, 0.3, 12.5, 0, 2.0, 2.5, 1};
    EXPECT(sv_outcome_predict(outcome, f, 11, &value) == SV_OK);
    EXPECT(value > 0.0 && value < 1.0);
    EXPECT(sv_outcome_predict(outcome, f, 10, &value) == SV_INVALID_ARGUMENT);
  }

  /* ESV with nothing observed is the prior expectation. */
  {
    sv_shot_context ctx = {2, 1, 0, 0.0};
    sv_estimate prior, again;
    EXPECT(sv_observations_new(33, &obs) == SV_OK);
    EXPECT(sv_esv_at(obs, mixture, outcome, &ctx, 500, 9, &prior) == SV_OK);
    EXPECT(sv_esv_at(obs, mixture, outcome, &ctx, 500, 9, &again) == SV_OK);
    EXPECT(prior.mean == again.mean && prior.se == again.se);
    EXPECT(sv_observations_add_unit(obs, 40, 0.0, 0.0) == SV_INVALID_ARGUMENT);
    EXPECT(sv_observations_add_unit(obs, 0, 0.5, 1e-4) == SV_OK);
    EXPECT(sv_observations_size(obs) == 1);
    EXPECT(sv_esv_at(obs, mixture, outcome, &ctx, 500, 9, &again) == SV_OK);
    ctx.shot_type = 7;
    EXPECT(sv_esv_at(obs, mixture, outcome, &ctx, 500, 9, &again) == SV_INVALID_ARGUMENT);
  }

  EXPECT(sv_run(config, "metrics", NULL, NULL) == SV_OK);
  EXPECT(sv_run(config, "heatmap", NULL, NULL) == SV_OK);

  sv_observations_free(obs);
  sv_outcome_free(outcome);
  sv_mixture_free(mixture);
  sv_config_free(config);
  sv_config_free(NULL);

  if (failures) fprintf(stderr, "%d expectation(s) failed\n", failures);
  else printf("capi: all expectations met\n");
  return failures ? 1 : 0;
}

/* Exercises the public C interface from C. Exits non-zero on the first failure. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "ccan/ccan.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(int argc, char** argv) {
  const char* root = argc > 1 ? argv[1] : "capi_runs";
  ccan_config* cfg = NULL;
  char buf[64];
  size_t needed = 0;
  double auc = 0.0;
  uint64_t macs = 0;
  const double scores[] = {0.1, 0.4, 0.35, 0.8};
  const int labels[] = {0, 0, 1, 1};
  const int single[] = {1, 1, 1, 1};

  EXPECT(strlen(ccan_version()) > 0);
  EXPECT(strcmp(ccan_status_string(CCAN_ERR_CONFIG), "config error") == 0);
  EXPECT(strstr(ccan_command_list(), "train") != NULL);

  EXPECT(ccan_config_create(&cfg) == CCAN_OK);
  EXPECT(ccan_config_set(cfg, "model.M", "abc") == CCAN_ERR_CONFIG);
  EXPECT(strstr(ccan_last_error(), "model.M") != NULL);
  EXPECT(ccan_config_set(cfg, "no.such.key", "1") == CCAN_ERR_CONFIG);
  EXPECT(ccan_config_set(cfg, "model.M", "16") == CCAN_OK);
  EXPECT(strcmp(ccan_last_error(), "") == 0);

  EXPECT(ccan_config_get(cfg, "model.M", buf, sizeof buf, &needed) == CCAN_OK);
  EXPECT(strcmp(buf, "16") == 0);
  EXPECT(needed == 3);
  EXPECT(ccan_config_get(cfg, "model.M", buf, 2, &needed) == CCAN_ERR_BUFFER_TOO_SMALL);
  EXPECT(ccan_config_dump(cfg, NULL, 0, &needed) == CCAN_ERR_BUFFER_TOO_SMALL);
  EXPECT(needed > 100);

  EXPECT(ccan_auc_binary(scores, labels, 4, &auc) == CCAN_OK);
  EXPECT(auc == 0.75);
  EXPECT(ccan_auc_binary(scores, single, 4, &auc) == CCAN_ERR_METRIC);

  EXPECT(ccan_config_set(cfg, "model.M", "512") == CCAN_OK);
  EXPECT(ccan_count_macs(cfg, 3091, &macs) == CCAN_OK);
  EXPECT(macs == 36061330432ull);

  EXPECT(ccan_run(cfg, "fly") == CCAN_ERR_USAGE);

  /* Small end-to-end run, then load the checkpoint and predict one bag. */
  {
    const char* settings[][2] = {{"run.root", root}, {"run.name", "capi"}, {"model.J", "2"},   {"model.M", "16"},
                                 {"model.D_l", "32"}, {"model.D_f", "16"},  {"train.epochs", "2"}, {"train.batch_size", "8"},
                                 {"train.lr", "1e-3"}, {"synth.n_bags", "40"}};
    size_t i;
    char path[512];
    ccan_model* model = NULL;
    double probs[4];
    size_t count = 0;
    for (i = 0; i < sizeof settings / sizeof settings[0]; ++i) EXPECT(ccan_config_set(cfg, settings[i][0], settings[i][1]) == CCAN_OK);
    EXPECT(ccan_run(cfg, "synth") == CCAN_OK);
    EXPECT(ccan_run(cfg, "split") == CCAN_OK);
    EXPECT(ccan_run(cfg, "train") == CCAN_OK);

    snprintf(path, sizeof path, "%s/capi/fold0/checkpoint.ccan", root);
    EXPECT(ccan_model_load(path, &model) == CCAN_OK);
    if (model != NULL) {
      EXPECT(ccan_model_output_dim(model) == 1);
      snprintf(path, sizeof path, "%s/capi/data/bags/B0000.ccfb", root);
      EXPECT(ccan_model_predict_file(model, path, probs, 4, &count) == CCAN_OK);
      EXPECT(count == 1);
      EXPECT(probs[0] > 0.0 && probs[0] < 1.0);
      EXPECT(ccan_model_predict_file(model, "/nonexistent.ccfb", probs, 4, &count) == CCAN_ERR_IO);
      ccan_model_destroy(model);
    }
    EXPECT(ccan_model_load("/nonexistent.ccan", &model) == CCAN_ERR_IO);
  }

  ccan_config_destroy(cfg);
  if (failures == 0) printf("capi: all checks passed\n");
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}

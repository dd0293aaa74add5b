#include <math.h>
#include <stdio.h>
#include "rsirs.h"

#define CHECK(x)                                                        \
  do {                                                                  \
    RsirsStatus s_ = (x);                                               \
    if (s_ != RSIRS_STATUS_OK) {                                        \
      fprintf(stderr, "%s -> %d: %s\n", #x, s_, rsirs_last_error_message()); \
      return 1;                                                         \
    }                                                                   \
  } while (0)

int main(void) {
  RsirsConfig *cfg = NULL;
  CHECK(rsirs_config_from_toml("n_bs = 2\nantennas_per_bs = 2\nn_reflect = 4\n", &cfg));
  CHECK(rsirs_config_set_users(cfg, 2, 1e6));
  RsirsScenario *sc = NULL;
  CHECK(rsirs_scenario_new(cfg, 7, &sc));
  RsirsResult *res = NULL;
  CHECK(rsirs_optimize(sc, RSIRS_SCHEME_RS_IRS, 1, &res));
  double phases[4];
  CHECK(rsirs_result_phases(res, phases, 4));
  if (rsirs_result_phases(res, phases, 3) != RSIRS_STATUS_INVALID_INPUT) return 2;
  printf("feasible=%d power_w=%.6e n_phases=%zu\n", rsirs_result_feasible(res),
         rsirs_result_power_w(res), rsirs_result_n_phases(res));
  int ok = rsirs_result_feasible(res) == 1 && isfinite(rsirs_result_power_w(res));
  rsirs_result_free(res);
  rsirs_scenario_free(sc);
  rsirs_config_free(cfg);
  return ok ? 0 : 3;
}

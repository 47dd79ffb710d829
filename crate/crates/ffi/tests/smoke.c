#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "invsolve.h"

int main(void) {
    InvsolveProblem *p = NULL;
    if (invsolve_problem_new(17, 0.005, INVSOLVE_START_SOURCE, &p) != INVSOLVE_STATUS_OK) {
        return 1;
    }
    size_t n = invsolve_problem_dim(p);
    double *y = malloc(n * sizeof(double));
    double *u = malloc(n * sizeof(double));
    double delta = 0.0;
    if (invsolve_make_noise(p, 1e-2, 42, y, n, &delta) != INVSOLVE_STATUS_OK) {
        return 2;
    }
    InvsolveRunParams params = invsolve_run_params_default();
    params.delta = delta;
    InvsolveRunSummary s;
    if (invsolve_blm_run(p, y, n, &params, u, &s) != INVSOLVE_STATUS_OK) {
        return 3;
    }
    if (invsolve_problem_new(2, 0.0, INVSOLVE_START_ZERO, &p) != INVSOLVE_STATUS_INVALID_ARGUMENT) {
        return 4;
    }
    char msg[128];
    size_t len = invsolve_last_error_message(msg, sizeof msg);
    printf("dim=%zu N=%zu reached=%d residual_ok=%d error_len=%d\n", n, s.stop_index, s.discrepancy_reached,
           s.final_residual <= 1.5 * delta, len > 0);
    free(y);
    free(u);
    invsolve_problem_free(p);
    return 0;
}

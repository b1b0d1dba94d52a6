#include <stdio.h>
#include <stdlib.h>

#include "hardy_lab.h"

int main(void) {
    HlParams *p = NULL;
    if (hl_params_new(3, 0.25, &p) != HL_STATUS_OK) {
        return 1;
    }

    HlConstants c;
    hl_constants(p, 1.2, &c);
    printf("alpha %.3f  q_crit %.3f  gamma1 %.6e\n", c.alpha, c.q_crit, c.gamma1);

    HlOmega *sol = NULL;
    HlStatus s = hl_omega_solve(p, 1.2, 400, &sol);
    if (s != HL_STATUS_OK) {
        char msg[256];
        hl_last_error(msg, sizeof msg);
        fprintf(stderr, "omega solve failed (%d): %s\n", (int)s, msg);
        hl_params_free(p);
        return 1;
    }
    size_t m = hl_omega_len(sol);
    double *omega = malloc(m * sizeof *omega);
    hl_omega_values(sol, NULL, omega, m);
    printf("omega(0) = %.10f on %zu nodes\n", omega[0], m);

    HlOmega *none = NULL;
    if (hl_omega_solve(p, 1.45, 400, &none) == HL_STATUS_SUPERCRITICAL) {
        char msg[256];
        hl_last_error(msg, sizeof msg);
        printf("q = 1.45: %s\n", msg);
    }

    free(omega);
    hl_omega_free(sol);
    hl_params_free(p);
    return 0;
}

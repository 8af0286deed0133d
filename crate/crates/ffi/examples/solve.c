/* Solves a 3x3 system through the C interface; prints x one per line. */
#include <stdio.h>

#include "hybrid_lu.h"

int main(void) {
    /* [[4, -1, 0], [-2, 4, -1], [0, -2, 4]] */
    size_t row_ptr[] = {0, 2, 5, 7};
    size_t col_idx[] = {0, 1, 0, 1, 2, 1, 2};
    double values[] = {4, -1, -2, 4, -1, -2, 4};
    double b[] = {3, 1, 2};
    double x[3];

    HluSolver *solver = NULL;
    HluStatus st = hlu_solver_create(3, row_ptr, col_idx, values, 1, &solver);
    if (st != HLU_STATUS_OK) {
        fprintf(stderr, "create: %s: %s\n", hlu_status_name(st), hlu_last_error());
        return 1;
    }
    st = hlu_solver_solve(solver, b, x);
    if (st != HLU_STATUS_OK) {
        fprintf(stderr, "solve: %s: %s\n", hlu_status_name(st), hlu_last_error());
        hlu_solver_free(solver);
        return 1;
    }
    for (int i = 0; i < 3; i++) {
        printf("%.17g\n", x[i]);
    }

    /* a null handle is reported, not dereferenced */
    st = hlu_solver_solve(NULL, b, x);
    hlu_solver_free(solver);
    return st == HLU_STATUS_NULL_POINTER ? 0 : 1;
}

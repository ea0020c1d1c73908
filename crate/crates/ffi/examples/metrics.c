/* Minimal consumer of the C ABI: Chamfer/Hausdorff and a KNN graph. */
#include <stdio.h>
#include "pointup.h"

int main(void) {
    const double a[] = {0, 0, 0};
    const double b[] = {3, 4, 0};
    const double line[] = {0, 0, 0, 1, 0, 0, 3, 0, 0, 3.5, 0, 0};
    PuCloud *p = NULL, *q = NULL, *l = NULL;
    PuGraph *g = NULL, *e = NULL;
    double cd = -1, hd = -1;
    size_t entries[8];

    if (pu_cloud_new(a, 1, &p) != PU_STATUS_OK || pu_cloud_new(b, 1, &q) != PU_STATUS_OK) {
        fprintf(stderr, "cloud: %s\n", pu_last_error());
        return 1;
    }
    pu_chamfer(p, q, &cd);
    pu_hausdorff(p, q, &hd);
    printf("cd=%g hd=%g\n", cd, hd);

    pu_cloud_new(line, 4, &l);
    if (pu_knn(l, 2, &g) != PU_STATUS_OK || pu_graph_expand(g, &e) != PU_STATUS_OK) {
        fprintf(stderr, "knn: %s\n", pu_last_error());
        return 1;
    }
    pu_graph_copy_entries(g, entries, 8);
    printf("knn=%zu,%zu rows=%zu\n", entries[0], entries[1], pu_graph_rows(e));

    if (pu_knn(l, 9, &g) == PU_STATUS_OK) return 1;
    printf("error=%s\n", pu_last_error()[0] ? "set" : "empty");

    pu_graph_free(g);
    pu_graph_free(e);
    pu_cloud_free(p);
    pu_cloud_free(q);
    pu_cloud_free(l);
    return 0;
}

#include <stdio.h>
#include <string.h>

#include "boostsim.h"

int main(void) {
    BoostsimConfig *cfg = NULL;
    if (boostsim_config_from_toml("[campaign]\nduration = 0.5\n", &cfg) != BOOSTSIM_STATUS_OK) {
        return 1;
    }
    BoostsimDropResult *res = NULL;
    BoostsimStatus st = boostsim_run_drop(cfg, BOOSTSIM_MODE_BOOST, 4, 0, &res);
    if (st != BOOSTSIM_STATUS_OK) {
        return 2;
    }
    printf("ues %u sum_cell %.3f collisions %llu ipsec %u\n", boostsim_drop_ue_count(res),
           boostsim_drop_sum_cell_mbps(res), (unsigned long long)boostsim_drop_collisions(res),
           boostsim_ipsec_encapsulate(1500));

    BoostsimConfig *bad = NULL;
    st = boostsim_config_from_toml("[rlm]\newma_alpha = 2.0\n", &bad);
    char msg[256];
    boostsim_last_error_message(msg, sizeof msg);
    printf("status %d %s: %s\n", (int)st, boostsim_status_string(st), msg);

    boostsim_drop_free(res);
    boostsim_config_free(cfg);
    return 0;
}

"""Config presets reproducing the three simulated figures."""

from __future__ import annotations

FIG4 = """\
[experiment]
name = shuffle_dof
master_seed = 2020
trials = 100

[shuffle_dof]
K = 5, 10, 15, 20, 25
N_f = 5
F = 2
algorithms = nuclear, dc
"""

FIG6 = """\
[experiment]
name = edge_power
master_seed = 2020
trials = 50

[edge_power]
sinr_db = 0:10:2
N_ap = 3
L = 5
K_u = 10
M = 0, 25
phase_method = random
P_max = 1
P_c = 0.45
noise_dbm = {noise_dbm}
"""

FIG7 = """\
[experiment]
name = irs_power
master_seed = 2020
trials = 50

[irs_power]
sinr_db = 0:10:2
N_ap = 3
L = 5
K_u = 10
M = 25
methods = dc, sdr, random
P_max = 1
P_c = 0.45
noise_dbm = {noise_dbm}
max_rounds = {max_rounds}
"""

# receiver noise used by the edge presets (see README: calibration)
EDGE_NOISE_DBM = -100.0
FIG7_MAX_ROUNDS = 3

PRESETS = {
    "fig4": FIG4,
    "fig6": FIG6.format(noise_dbm=EDGE_NOISE_DBM),
    "fig7": FIG7.format(noise_dbm=EDGE_NOISE_DBM, max_rounds=FIG7_MAX_ROUNDS),
}
